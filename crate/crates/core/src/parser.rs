//! Recursive-descent parser for the Alloy subset.
//!
//! Parsing is split in two: this module builds syntax trees whose
//! identifiers are still `Expr::Name`, and [`crate::typeck`] resolves and
//! type-checks them against the declarations of a model.

use std::collections::BTreeMap;

use crate::ast::*;
use crate::error::{ErrorKind, ParseError};
use crate::lexer::{is_keyword, tokenize, Tok, Token};
use crate::typeck::{self, Resolver};

const MAX_DEPTH: usize = 96;

/// Parse and resolve a complete model. Every `run` command must carry an
/// `expect` clause.
pub fn parse_model(text: &str) -> Result<Model, ParseError> {
    let raw = parse_model_syntax(text, true)?;
    typeck::resolve_model(raw)
}

/// Parse a single `run` command in isolation and resolve it against `model`.
/// A missing `expect` clause is accepted and recorded as `None`.
pub fn parse_command(model: &Model, text: &str) -> Result<RunCommand, ParseError> {
    let mut p = Parser::new(text)?;
    p.require_expect = false;
    if !p.is_kw("run") {
        return Err(p.unexpected("expected `run`"));
    }
    let cmd = p.command()?;
    p.expect_eof()?;
    Resolver::new(model)?.resolve_command(cmd)
}

/// Parse a standalone formula (free variables are not allowed).
pub fn parse_formula(model: &Model, text: &str) -> Result<Formula, ParseError> {
    let f = parse_formula_syntax(text)?;
    Resolver::new(model)?.resolve_formula_closed(f)
}

/// Parse a file of `pred` declarations against `model`, e.g. a pool of
/// candidate specifications. Predicates of the model remain callable.
pub fn parse_predicates(model: &Model, text: &str) -> Result<Vec<PredDecl>, ParseError> {
    let mut p = Parser::new(text)?;
    let mut preds = Vec::new();
    while !p.at_eof() {
        if !p.is_kw("pred") {
            return Err(p.unexpected("expected `pred`"));
        }
        preds.push(p.pred()?);
    }
    let resolver = Resolver::new(model)?;
    preds.into_iter().map(|pd| resolver.resolve_standalone_pred(pd)).collect()
}

/// Syntax-only parse of a model; names are left unresolved.
pub fn parse_model_syntax(text: &str, require_expect: bool) -> Result<Model, ParseError> {
    let mut p = Parser::new(text)?;
    p.require_expect = require_expect;
    p.model()
}

pub fn parse_formula_syntax(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(text)?;
    let f = p.formula()?;
    p.expect_eof()?;
    Ok(f)
}

pub fn parse_expr_syntax(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

/// Syntax-only parse of one `run` command.
pub fn parse_command_syntax(text: &str) -> Result<RunCommand, ParseError> {
    let mut p = Parser::new(text)?;
    p.require_expect = false;
    if !p.is_kw("run") {
        return Err(p.unexpected("expected `run`"));
    }
    let cmd = p.command()?;
    p.expect_eof()?;
    Ok(cmd)
}

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
    require_expect: bool,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number(n) => format!("`{n}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

impl Parser {
    pub(crate) fn new(text: &str) -> Result<Parser, ParseError> {
        Ok(Parser { toks: tokenize(text)?, pos: 0, depth: 0, require_expect: true })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> SourceSpan {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn is_kw_at(&self, k: usize, kw: &str) -> bool {
        matches!(self.peek_at(k), Tok::Ident(s) if s == kw)
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn is_sym_at(&self, k: usize, sym: &str) -> bool {
        matches!(self.peek_at(k), Tok::Sym(s) if *s == sym)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        ParseError::new(
            ErrorKind::Syntactic,
            self.span(),
            format!("{what}, found {}", describe(self.peek())),
        )
    }

    fn unsupported(&self, what: &str) -> ParseError {
        ParseError::new(ErrorKind::Syntactic, self.span(), format!("{what} are not supported"))
    }

    fn expect_sym(&mut self, sym: &str) -> Result<SourceSpan, ParseError> {
        if self.is_sym(sym) {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&format!("expected `{sym}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<SourceSpan, ParseError> {
        if self.is_kw(kw) {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&format!("expected `{kw}`")))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.unexpected("expected end of input"))
        }
    }

    fn ident(&mut self) -> Result<(Ident, SourceSpan), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                let t = self.advance();
                Ok((s, t.span))
            }
            Tok::Ident(s) if s == "Int" || s == "int" => Err(self.unsupported("integers")),
            _ => Err(self.unexpected("expected an identifier")),
        }
    }

    fn number(&mut self) -> Result<u32, ParseError> {
        match self.peek() {
            Tok::Number(n) => {
                let n = *n;
                self.advance();
                Ok(n)
            }
            _ => Err(self.unexpected("expected a number")),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(ParseError::new(ErrorKind::Syntactic, self.span(), "nesting too deep"))
        } else {
            Ok(())
        }
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    // ---- paragraphs ----

    fn model(&mut self) -> Result<Model, ParseError> {
        let mut m = Model::default();
        while !self.at_eof() {
            match self.peek().clone() {
                Tok::Ident(kw) => match kw.as_str() {
                    "module" => {
                        self.advance();
                        let (mut name, _) = self.ident()?;
                        while self.eat_sym("/") {
                            name.push('/');
                            name.push_str(&self.ident()?.0);
                        }
                        m.name = name;
                    }
                    "open" => {
                        let sig = self.open()?;
                        m.orderings.push(sig);
                    }
                    "abstract" | "sig" | "one" | "lone" | "some" => {
                        m.sigs.extend(self.sig_decl()?);
                    }
                    "fact" => {
                        let span = self.advance().span;
                        let name = if let Tok::Ident(s) = self.peek() {
                            if is_keyword(s) {
                                String::new()
                            } else {
                                self.ident()?.0
                            }
                        } else {
                            String::new()
                        };
                        let body = self.block(span)?;
                        m.facts.push(Fact { name, body });
                    }
                    "pred" => m.preds.push(self.pred()?),
                    "fun" => m.funs.push(self.fun()?),
                    "run" => m.commands.push(self.command()?),
                    "check" => return Err(self.unsupported("`check` commands")),
                    "assert" => return Err(self.unsupported("assertions")),
                    _ => return Err(self.unexpected("expected a declaration")),
                },
                _ => return Err(self.unexpected("expected a declaration")),
            }
        }
        Ok(m)
    }

    fn open(&mut self) -> Result<Ident, ParseError> {
        let start = self.expect_kw("open")?;
        let (first, _) = self.ident()?;
        let mut path = first;
        while self.eat_sym("/") {
            path.push('/');
            path.push_str(&self.ident()?.0);
        }
        if path != "util/ordering" {
            return Err(ParseError::new(
                ErrorKind::Resolution,
                start.to(self.prev_span()),
                format!("module `{path}` is not supported (only util/ordering)"),
            ));
        }
        self.expect_sym("[")?;
        let (sig, _) = self.ident()?;
        self.expect_sym("]")?;
        if self.is_kw("as") {
            return Err(self.unsupported("module aliases"));
        }
        Ok(sig)
    }

    fn sig_decl(&mut self) -> Result<Vec<SigDecl>, ParseError> {
        let start = self.span();
        let is_abstract = self.eat_kw("abstract");
        let multiplicity = if self.eat_kw("lone") {
            Some(SigMult::Lone)
        } else if self.eat_kw("some") {
            Some(SigMult::Some)
        } else if self.eat_kw("one") {
            Some(SigMult::One)
        } else {
            None
        };
        self.expect_kw("sig")?;
        let mut names = vec![self.ident()?.0];
        while self.eat_sym(",") {
            names.push(self.ident()?.0);
        }
        let kind = if self.eat_kw("extends") {
            SigKind::Extension(self.ident()?.0)
        } else if self.eat_kw("in") {
            let parent = self.ident()?.0;
            if self.is_sym("+") {
                return Err(self.unsupported("subset signatures with several parents"));
            }
            SigKind::Subset(parent)
        } else {
            SigKind::TopLevel
        };
        let span = start.to(self.prev_span());
        self.expect_sym("{")?;
        let mut fields: Vec<(Vec<Ident>, Vec<Ident>, Multiplicity, SourceSpan)> = Vec::new();
        while !self.is_sym("}") {
            fields.push(self.field_decl()?);
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym("}")?;
        if self.is_sym("{") {
            return Err(self.unsupported("signature facts"));
        }
        Ok(names
            .into_iter()
            .map(|name| SigDecl {
                fields: fields
                    .iter()
                    .flat_map(|(fnames, cols, mult, fspan)| {
                        fnames.iter().map(|fname| FieldDecl {
                            name: fname.clone(),
                            owner: name.clone(),
                            columns: cols.clone(),
                            multiplicity: *mult,
                            span: Span(*fspan),
                        })
                    })
                    .collect(),
                name,
                kind: kind.clone(),
                is_abstract,
                multiplicity,
                span: Span(span),
            })
            .collect())
    }

    fn field_mult(&mut self) -> Option<Multiplicity> {
        let m = match self.peek() {
            Tok::Ident(s) => match s.as_str() {
                "set" => Multiplicity::Set,
                "lone" => Multiplicity::Lone,
                "some" => Multiplicity::Some,
                "one" => Multiplicity::One,
                _ => return None,
            },
            _ => return None,
        };
        self.advance();
        Some(m)
    }

    #[allow(clippy::type_complexity)]
    fn field_decl(&mut self) -> Result<(Vec<Ident>, Vec<Ident>, Multiplicity, SourceSpan), ParseError> {
        let start = self.span();
        if self.is_kw("disj") {
            return Err(self.unsupported("disjoint field declarations"));
        }
        let mut names = vec![self.ident()?.0];
        while self.eat_sym(",") {
            names.push(self.ident()?.0);
        }
        self.expect_sym(":")?;
        let lead = self.field_mult();
        let mut cols = vec![self.ident()?.0];
        let mut mult = lead.unwrap_or(Multiplicity::One);
        if self.is_sym("->") {
            if lead.is_some() {
                return Err(self.unsupported("multiplicities on the first column of an arrow"));
            }
            mult = Multiplicity::Set;
            while self.eat_sym("->") {
                let m = self.field_mult();
                cols.push(self.ident()?.0);
                if let Some(m) = m {
                    if self.is_sym("->") {
                        return Err(self.unsupported("multiplicities on inner arrow columns"));
                    }
                    mult = m;
                }
            }
        }
        if self.is_sym("<:") || self.is_sym("+") || self.is_sym("&") || self.is_sym("-") {
            return Err(self.unsupported("field types other than signature products"));
        }
        Ok((names, cols, mult, start.to(self.prev_span())))
    }

    fn params(&mut self) -> Result<Vec<Param>, ParseError> {
        let close = if self.eat_sym("[") {
            "]"
        } else if self.eat_sym("(") {
            ")"
        } else {
            return Ok(Vec::new());
        };
        let mut params = Vec::new();
        while !self.is_sym(close) {
            self.eat_kw("disj");
            let mut names = vec![self.ident()?.0];
            while self.eat_sym(",") {
                names.push(self.ident()?.0);
            }
            self.expect_sym(":")?;
            if self.is_kw("set") || self.is_kw("lone") || self.is_kw("some") {
                return Err(self.unsupported("parameter multiplicities"));
            }
            self.eat_kw("one");
            let bound = self.expr()?;
            params.extend(names.into_iter().map(|name| Param { name, bound: bound.clone() }));
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(close)?;
        Ok(params)
    }

    fn pred(&mut self) -> Result<PredDecl, ParseError> {
        let kw = self.advance();
        let (name, _) = self.ident()?;
        if self.is_sym(".") {
            return Err(self.unsupported("receiver predicates"));
        }
        let params = self.params()?;
        let body = self.block(kw.span)?;
        Ok(PredDecl { name, params, body, comment: kw.comment })
    }

    fn fun(&mut self) -> Result<FunDecl, ParseError> {
        self.expect_kw("fun")?;
        let (name, _) = self.ident()?;
        let params = self.params()?;
        self.expect_sym(":")?;
        self.eat_kw("set");
        if self.is_kw("one") || self.is_kw("lone") || self.is_kw("some") {
            self.advance();
        }
        let result = self.expr()?;
        self.expect_sym("{")?;
        let body = self.expr()?;
        self.expect_sym("}")?;
        Ok(FunDecl { name, params, result, body })
    }

    pub(crate) fn command(&mut self) -> Result<RunCommand, ParseError> {
        let run = self.advance();
        let start = run.span;
        let mut name = String::new();
        if let Tok::Ident(s) = self.peek() {
            if !is_keyword(s) {
                name = self.ident()?.0;
            }
        }
        let body = if self.is_sym("{") {
            self.block(self.span())?
        } else if !name.is_empty() {
            Formula::with_span(FormulaKind::Call(name.clone(), Vec::new()), start)
        } else {
            return Err(self.unexpected("expected a command name or `{`"));
        };
        let mut scopes = BTreeMap::new();
        let mut default_bound = None;
        if self.eat_kw("for") {
            let mut items = true;
            if let Tok::Number(n) = *self.peek() {
                if !matches!(self.peek_at(1), Tok::Ident(s) if !is_keyword(s) || s == "Int" || s == "int")
                {
                    self.advance();
                    default_bound = Some(n);
                    items = self.eat_kw("but");
                }
            }
            if items {
                loop {
                    let exact = self.eat_kw("exactly");
                    let bound = self.number()?;
                    if self.is_kw("Int") || self.is_kw("int") {
                        return Err(self.unsupported("integer scopes"));
                    }
                    let (sig, sspan) = self.ident()?;
                    if scopes.insert(sig.clone(), Scope { bound, exact }).is_some() {
                        return Err(ParseError::new(
                            ErrorKind::Syntactic,
                            sspan,
                            format!("scope for `{sig}` given twice"),
                        ));
                    }
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
        }
        let expect = if self.eat_kw("expect") {
            let n = self.number()?;
            match Expect::from_digit(n) {
                Some(e) => Some(e),
                None => {
                    return Err(ParseError::new(
                        ErrorKind::Syntactic,
                        self.prev_span(),
                        format!("`expect {n}`: expectation must be 0 or 1"),
                    ))
                }
            }
        } else {
            if self.require_expect {
                return Err(self.unexpected("expected `expect 0` or `expect 1`"));
            }
            None
        };
        let span = start.to(self.prev_span());
        Ok(RunCommand {
            name,
            body,
            scopes,
            default_bound,
            expect,
            comment: run.comment,
            span: Span(span),
        })
    }

    // ---- formulas ----

    fn block(&mut self, start: SourceSpan) -> Result<Formula, ParseError> {
        self.expect_sym("{")?;
        self.enter()?;
        let mut items = Vec::new();
        while !self.is_sym("}") {
            if self.at_eof() {
                return Err(self.unexpected("expected `}`"));
            }
            items.push(self.formula()?);
        }
        self.leave();
        self.expect_sym("}")?;
        Ok(Formula::with_span(FormulaKind::Block(items), start.to(self.prev_span())))
    }

    pub(crate) fn formula(&mut self) -> Result<Formula, ParseError> {
        self.enter()?;
        let f = self.or_formula();
        self.leave();
        f
    }

    fn or_formula(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.iff_formula()?;
        while self.is_sym("||") || self.is_kw("or") {
            self.advance();
            let r = self.iff_formula()?;
            let span = l.source_span().to(r.source_span());
            l = Formula::with_span(FormulaKind::Binary(Logic::Or, Box::new(l), Box::new(r)), span);
        }
        Ok(l)
    }

    fn iff_formula(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.implies_formula()?;
        while self.is_sym("<=>") || self.is_kw("iff") {
            self.advance();
            let r = self.implies_formula()?;
            let span = l.source_span().to(r.source_span());
            l = Formula::with_span(FormulaKind::Binary(Logic::Iff, Box::new(l), Box::new(r)), span);
        }
        Ok(l)
    }

    fn implies_formula(&mut self) -> Result<Formula, ParseError> {
        let cond = self.and_formula()?;
        if self.is_sym("=>") || self.is_kw("implies") {
            self.advance();
            self.enter()?;
            let then = self.implies_formula();
            self.leave();
            let then = then?;
            if self.eat_kw("else") {
                self.enter()?;
                let els = self.implies_formula();
                self.leave();
                let els = els?;
                let span = cond.source_span().to(els.source_span());
                return Ok(Formula::with_span(
                    FormulaKind::IfElse(Box::new(cond), Box::new(then), Box::new(els)),
                    span,
                ));
            }
            let span = cond.source_span().to(then.source_span());
            return Ok(Formula::with_span(
                FormulaKind::Binary(Logic::Implies, Box::new(cond), Box::new(then)),
                span,
            ));
        }
        Ok(cond)
    }

    fn and_formula(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.unary_formula()?;
        while self.is_sym("&&") || self.is_kw("and") {
            self.advance();
            let r = self.unary_formula()?;
            let span = l.source_span().to(r.source_span());
            l = Formula::with_span(FormulaKind::Binary(Logic::And, Box::new(l), Box::new(r)), span);
        }
        Ok(l)
    }

    fn is_quant_start(&self) -> bool {
        let q = match self.peek() {
            Tok::Ident(s) => s.as_str(),
            _ => return false,
        };
        match q {
            "all" => true,
            "some" | "no" | "lone" | "one" => {
                if self.is_kw_at(1, "disj") {
                    return true;
                }
                match self.peek_at(1) {
                    Tok::Ident(s) if !is_keyword(s) => {
                        self.is_sym_at(2, ",") || self.is_sym_at(2, ":")
                    }
                    _ => false,
                }
            }
            _ => false,
        }
    }

    fn unary_formula(&mut self) -> Result<Formula, ParseError> {
        self.enter()?;
        let r = self.unary_formula_inner();
        self.leave();
        r
    }

    fn unary_formula_inner(&mut self) -> Result<Formula, ParseError> {
        let start = self.span();
        if self.is_sym("!") || self.is_kw("not") {
            self.advance();
            let f = self.unary_formula()?;
            let span = start.to(f.source_span());
            return Ok(Formula::with_span(FormulaKind::Not(Box::new(f)), span));
        }
        if self.is_quant_start() {
            return self.quantified();
        }
        if self.is_sym("{") {
            return self.block(start);
        }
        if self.is_sym("(") {
            let save = self.pos;
            let depth = self.depth;
            self.advance();
            if let Ok(f) = self.formula() {
                if self.eat_sym(")") && !self.continues_expression() {
                    return Ok(f);
                }
            }
            self.pos = save;
            self.depth = depth;
        }
        self.comparison()
    }

    /// Whether the next token would extend an expression or start a comparison.
    fn continues_expression(&self) -> bool {
        match self.peek() {
            Tok::Sym(s) => matches!(
                *s,
                "." | "[" | "->" | "+" | "-" | "&" | "<:" | ":>" | "=" | "!=" | "!"
            ),
            Tok::Ident(s) => s == "in" || (s == "not" && self.is_kw_at(1, "in")),
            _ => false,
        }
    }

    fn quantified(&mut self) -> Result<Formula, ParseError> {
        let start = self.span();
        let quant = match self.advance().tok {
            Tok::Ident(s) => match s.as_str() {
                "all" => Quantifier::All,
                "some" => Quantifier::Some,
                "no" => Quantifier::No,
                "lone" => Quantifier::Lone,
                _ => Quantifier::One,
            },
            _ => unreachable!("checked by is_quant_start"),
        };
        let mut decls = Vec::new();
        loop {
            let disj = self.eat_kw("disj");
            let mut names = vec![self.ident()?.0];
            while self.eat_sym(",") {
                names.push(self.ident()?.0);
            }
            self.expect_sym(":")?;
            if self.is_kw("set") || self.is_kw("lone") || self.is_kw("some") {
                return Err(self.unsupported("higher-order quantifier bounds"));
            }
            self.eat_kw("one");
            let bound = self.expr()?;
            decls.push(Decl { disj, names, bound });
            if !self.eat_sym(",") {
                break;
            }
        }
        let body = if self.eat_sym("|") {
            self.formula()?
        } else if self.is_sym("{") {
            self.block(self.span())?
        } else {
            return Err(self.unexpected("expected `|` or `{` after quantifier declarations"));
        };
        let span = start.to(body.source_span());
        Ok(Formula::with_span(FormulaKind::Quant { quant, decls, body: Box::new(body) }, span))
    }

    fn comparison(&mut self) -> Result<Formula, ParseError> {
        let start = self.span();
        let mult = match self.peek() {
            Tok::Ident(s) => match s.as_str() {
                "no" => Some(MultTest::No),
                "some" => Some(MultTest::Some),
                "lone" => Some(MultTest::Lone),
                "one" => Some(MultTest::One),
                _ => None,
            },
            _ => None,
        };
        if let Some(m) = mult {
            self.advance();
            let e = self.expr()?;
            return Ok(Formula::with_span(FormulaKind::Mult(m, e), start.to(self.prev_span())));
        }
        if self.is_kw("set") {
            return Err(self.unsupported("`set` formulas"));
        }
        let left = self.expr()?;
        let op = if self.eat_kw("in") {
            Some(CompareOp::In)
        } else if self.eat_sym("=") {
            Some(CompareOp::Eq)
        } else if self.eat_sym("!=") {
            Some(CompareOp::NotEq)
        } else if (self.is_kw("not") || self.is_sym("!")) && self.is_kw_at(1, "in") {
            self.advance();
            self.advance();
            Some(CompareOp::NotIn)
        } else if self.is_sym("<") || self.is_sym(">") || self.is_sym("<=") || self.is_sym(">=") {
            return Err(self.unsupported("integer comparisons"));
        } else {
            None
        };
        match op {
            Some(op) => {
                let right = self.expr()?;
                Ok(Formula::with_span(
                    FormulaKind::Compare(op, left, right),
                    start.to(self.prev_span()),
                ))
            }
            None => {
                let span = start.to(self.prev_span());
                match left {
                    Expr::Name(n) => Ok(Formula::with_span(FormulaKind::Call(n, Vec::new()), span)),
                    Expr::BoxJoin(target, args) => match *target {
                        Expr::Name(n) => Ok(Formula::with_span(FormulaKind::Call(n, args), span)),
                        _ => Err(self.unexpected("expected a comparison operator")),
                    },
                    _ => Err(self.unexpected("expected a comparison operator")),
                }
            }
        }
    }

    // ---- expressions ----

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let r = self.union_expr();
        self.leave();
        r
    }

    fn union_expr(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.intersect_expr()?;
        loop {
            let op = if self.is_sym("+") {
                BinaryOp::Union
            } else if self.is_sym("-") {
                BinaryOp::Difference
            } else if self.is_sym("++") {
                return Err(self.unsupported("relational override"));
            } else {
                return Ok(l);
            };
            self.advance();
            let r = self.intersect_expr()?;
            l = Expr::binary(op, l, r);
        }
    }

    fn intersect_expr(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.product_expr()?;
        while self.eat_sym("&") {
            let r = self.product_expr()?;
            l = Expr::binary(BinaryOp::Intersection, l, r);
        }
        Ok(l)
    }

    fn product_expr(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.range_expr()?;
        while self.eat_sym("->") {
            if self.is_kw("set") || self.is_kw("one") || self.is_kw("lone") || self.is_kw("some") {
                return Err(self.unsupported("arrow multiplicities in expressions"));
            }
            let r = self.range_expr()?;
            l = Expr::binary(BinaryOp::Product, l, r);
        }
        Ok(l)
    }

    fn range_expr(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.domain_expr()?;
        while self.eat_sym(":>") {
            let r = self.domain_expr()?;
            l = Expr::binary(BinaryOp::RangeRestrict, l, r);
        }
        Ok(l)
    }

    fn domain_expr(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.join_expr()?;
        while self.eat_sym("<:") {
            let r = self.join_expr()?;
            l = Expr::binary(BinaryOp::DomainRestrict, l, r);
        }
        Ok(l)
    }

    fn join_expr(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.unary_expr()?;
        loop {
            if self.eat_sym(".") {
                let r = self.unary_expr()?;
                l = Expr::binary(BinaryOp::Join, l, r);
            } else if self.eat_sym("[") {
                let mut args = Vec::new();
                while !self.is_sym("]") {
                    args.push(self.expr()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym("]")?;
                l = Expr::BoxJoin(Box::new(l), args);
            } else {
                return Ok(l);
            }
        }
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        let op = if self.is_sym("~") {
            UnaryOp::Transpose
        } else if self.is_sym("^") {
            UnaryOp::Closure
        } else if self.is_sym("*") {
            UnaryOp::ReflexiveClosure
        } else {
            return self.primary();
        };
        self.advance();
        self.enter()?;
        let e = self.unary_expr();
        self.leave();
        Ok(Expr::unary(op, e?))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => match s.as_str() {
                "none" => {
                    self.advance();
                    Ok(Expr::None)
                }
                "univ" => {
                    self.advance();
                    Ok(Expr::Univ)
                }
                "iden" => {
                    self.advance();
                    Ok(Expr::Iden)
                }
                "Int" | "int" | "sum" => Err(self.unsupported("integers")),
                "this" => Err(self.unsupported("`this` references")),
                "let" => Err(self.unsupported("`let` bindings")),
                _ if is_keyword(&s) => Err(self.unexpected("expected an expression")),
                _ => {
                    self.advance();
                    Ok(Expr::Name(s))
                }
            },
            Tok::Sym("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Number(_) | Tok::Sym("#") => Err(self.unsupported("integer expressions")),
            Tok::Sym("{") => Err(self.unsupported("set comprehensions")),
            Tok::Sym("@") => Err(self.unsupported("`@` references")),
            _ => Err(self.unexpected("expected an expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_of_relational_operators() {
        let e = parse_expr_syntax("a + b . c -> d & e").unwrap();
        // union binds loosest, then &, ->, and join tightest
        let expected = Expr::binary(
            BinaryOp::Union,
            Expr::name("a"),
            Expr::binary(
                BinaryOp::Intersection,
                Expr::binary(
                    BinaryOp::Product,
                    Expr::binary(BinaryOp::Join, Expr::name("b"), Expr::name("c")),
                    Expr::name("d"),
                ),
                Expr::name("e"),
            ),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn restriction_binds_tighter_than_product() {
        let e = parse_expr_syntax("S <: f -> g").unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinaryOp::Product,
                Expr::binary(BinaryOp::DomainRestrict, Expr::name("S"), Expr::name("f")),
                Expr::name("g"),
            )
        );
    }

    #[test]
    fn implies_is_looser_than_comparison() {
        let f = parse_formula_syntax("all p : Person | p in Student implies some p.enrolled").unwrap();
        let FormulaKind::Quant { body, .. } = f.kind else { panic!() };
        assert!(matches!(body.kind, FormulaKind::Binary(Logic::Implies, _, _)));
    }

    #[test]
    fn parenthesized_expression_versus_formula() {
        let f = parse_formula_syntax("(a + b) in c").unwrap();
        assert!(matches!(f.kind, FormulaKind::Compare(CompareOp::In, _, _)));
        let g = parse_formula_syntax("(a in b) and (no c)").unwrap();
        assert!(matches!(g.kind, FormulaKind::Binary(Logic::And, _, _)));
    }

    #[test]
    fn some_disj_groups() {
        let f = parse_formula_syntax("some disj P1 : Person, disj C1 : Course, disj G1,G2 : Grade { Person = P1 }").unwrap();
        let FormulaKind::Quant { quant, decls, body } = f.kind else { panic!() };
        assert_eq!(quant, Quantifier::Some);
        assert_eq!(decls.len(), 3);
        assert!(decls.iter().all(|d| d.disj));
        assert_eq!(decls[2].names, vec!["G1", "G2"]);
        assert!(matches!(body.kind, FormulaKind::Block(_)));
    }

    #[test]
    fn multiplicity_formula_is_not_a_quantifier() {
        let f = parse_formula_syntax("some p.enrolled").unwrap();
        assert!(matches!(f.kind, FormulaKind::Mult(MultTest::Some, _)));
    }

    #[test]
    fn command_scopes_and_expect() {
        let c = parse_command_syntax("run T { } for 3 but exactly 2 A, 1 B expect 0").unwrap();
        assert_eq!(c.default_bound, Some(3));
        assert_eq!(c.scopes["A"], Scope { bound: 2, exact: true });
        assert_eq!(c.scopes["B"], Scope { bound: 1, exact: false });
        assert_eq!(c.expect, Some(Expect::Unsat));
        let e = parse_command_syntax("run T { } expect 2").unwrap_err();
        assert!(e.message.contains("expect 2"));
    }

    #[test]
    fn missing_expect_only_rejected_in_models() {
        assert!(parse_command_syntax("run T {} for 1 A").unwrap().expect.is_none());
        let e = parse_model_syntax("sig A {} run T {} for 1 A", true).unwrap_err();
        assert_eq!(e.kind, ErrorKind::Syntactic);
    }

    #[test]
    fn unsupported_constructs_are_syntax_errors() {
        for src in ["sig A {} check {}", "sig A {} assert X {}", "sig A { f: Int }"] {
            assert!(parse_model_syntax(src, true).is_err(), "{src}");
        }
        assert!(parse_formula_syntax("#A = 2").is_err());
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = "(".repeat(10_000) + "a";
        assert!(parse_expr_syntax(&src).is_err());
        let src = "!".repeat(10_000) + "no a";
        assert!(parse_formula_syntax(&src).is_err());
    }

    #[test]
    fn error_names_offending_token() {
        let e = parse_model_syntax("sig A { f : }", true).unwrap_err();
        assert!(e.message.contains("`}`"), "{}", e.message);
        assert_eq!((e.span.start_line, e.span.start_col), (1, 13));
    }
}
