//! Concrete syntax printing.
//!
//! Output re-parses to a structurally equal tree. Resolved trees can be
//! printed with a model, in which case overloaded fields are qualified with
//! `<:` so that re-resolution picks the same relation.

use std::fmt::Write;

use crate::ast::*;

pub fn render_model(m: &Model) -> String {
    Printer::new(Some(m)).model(m)
}

pub fn render_command(c: &RunCommand) -> String {
    let mut p = Printer::new(None);
    p.command(c);
    p.out
}

pub fn render_command_in(model: &Model, c: &RunCommand) -> String {
    let mut p = Printer::new(Some(model));
    p.command(c);
    p.out
}

pub fn render_formula(f: &Formula) -> String {
    let mut p = Printer::new(None);
    p.formula(f, 0, true);
    p.out
}

pub fn render_formula_in(model: &Model, f: &Formula) -> String {
    let mut p = Printer::new(Some(model));
    p.formula(f, 0, true);
    p.out
}

pub fn render_expr(e: &Expr) -> String {
    let mut p = Printer::new(None);
    p.expr(e, 0);
    p.out
}

pub fn render_expr_in(model: &Model, e: &Expr) -> String {
    let mut p = Printer::new(Some(model));
    p.expr(e, 0);
    p.out
}

pub fn render_pred(pd: &PredDecl) -> String {
    let mut p = Printer::new(None);
    p.pred(pd);
    p.out
}

pub fn render_pred_in(model: &Model, pd: &PredDecl) -> String {
    let mut p = Printer::new(Some(model));
    p.pred(pd);
    p.out
}

// Expression levels, loosest first.
const E_UNION: u8 = 0;
const E_INTERSECT: u8 = 1;
const E_PRODUCT: u8 = 2;
const E_RANGE: u8 = 3;
const E_DOMAIN: u8 = 4;
const E_JOIN: u8 = 5;
const E_UNARY: u8 = 6;
const E_ATOM: u8 = 7;

// Formula levels.
const F_OR: u8 = 0;
const F_IFF: u8 = 1;
const F_IMPLIES: u8 = 2;
const F_AND: u8 = 3;
const F_UNARY: u8 = 4;

fn binary_level(op: BinaryOp) -> u8 {
    match op {
        BinaryOp::Union | BinaryOp::Difference => E_UNION,
        BinaryOp::Intersection => E_INTERSECT,
        BinaryOp::Product => E_PRODUCT,
        BinaryOp::RangeRestrict => E_RANGE,
        BinaryOp::DomainRestrict => E_DOMAIN,
        BinaryOp::Join => E_JOIN,
    }
}

/// `S <: r` where `r` is a relation owned by `S`, which already resolves
/// unambiguously when `r` is written bare.
fn restricts_to_owner(a: &Expr, b: &Expr) -> bool {
    match (a, b) {
        (Expr::Sig(s), Expr::Field { owner, .. }) => s == owner,
        (Expr::Sig(s), Expr::Next(o) | Expr::First(o) | Expr::Last(o)) => s == o,
        _ => false,
    }
}

fn bare_name(e: &Expr) -> String {
    match e {
        Expr::Field { name, .. } => name.clone(),
        Expr::Next(_) => "next".into(),
        Expr::First(_) => "first".into(),
        _ => "last".into(),
    }
}

fn expr_level(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => binary_level(*op),
        Expr::BoxJoin(..) => E_JOIN,
        Expr::Unary(..) => E_UNARY,
        _ => E_ATOM,
    }
}

struct Printer<'m> {
    out: String,
    indent: usize,
    model: Option<&'m Model>,
}

impl<'m> Printer<'m> {
    fn new(model: Option<&'m Model>) -> Printer<'m> {
        Printer { out: String::new(), indent: 0, model }
    }

    fn newline(&mut self) {
        self.out.push('\n');
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
    }

    fn comment(&mut self, c: &Option<String>) {
        if let Some(c) = c {
            for line in c.lines() {
                let _ = write!(self.out, "// {line}");
                self.newline();
            }
        }
    }

    fn model(&mut self, m: &Model) -> String {
        if !m.name.is_empty() {
            let _ = writeln!(self.out, "module {}", m.name);
        }
        for o in &m.orderings {
            let _ = writeln!(self.out, "open util/ordering[{o}]");
        }
        for s in &m.sigs {
            self.out.push('\n');
            self.sig(s);
            self.out.push('\n');
        }
        for f in &m.facts {
            self.out.push('\n');
            self.out.push_str("fact ");
            if !f.name.is_empty() {
                self.out.push_str(&f.name);
                self.out.push(' ');
            }
            self.paragraph_body(&f.body);
            self.out.push('\n');
        }
        for f in &m.funs {
            self.out.push('\n');
            let _ = write!(self.out, "fun {}", f.name);
            self.params(&f.params);
            self.out.push_str(" : ");
            self.expr(&f.result, 0);
            self.out.push_str(" {");
            self.indent += 1;
            self.newline();
            self.expr(&f.body, 0);
            self.indent -= 1;
            self.newline();
            self.out.push_str("}\n");
        }
        for p in &m.preds {
            self.out.push('\n');
            self.pred(p);
            self.out.push('\n');
        }
        for c in &m.commands {
            self.out.push('\n');
            self.command(c);
            self.out.push('\n');
        }
        std::mem::take(&mut self.out)
    }

    fn sig(&mut self, s: &SigDecl) {
        if s.is_abstract {
            self.out.push_str("abstract ");
        }
        match s.multiplicity {
            Some(SigMult::Lone) => self.out.push_str("lone "),
            Some(SigMult::Some) => self.out.push_str("some "),
            Some(SigMult::One) => self.out.push_str("one "),
            None => {}
        }
        let _ = write!(self.out, "sig {}", s.name);
        match &s.kind {
            SigKind::TopLevel => {}
            SigKind::Subset(p) => {
                let _ = write!(self.out, " in {p}");
            }
            SigKind::Extension(p) => {
                let _ = write!(self.out, " extends {p}");
            }
        }
        if s.fields.is_empty() {
            self.out.push_str(" {}");
            return;
        }
        self.out.push_str(" {");
        self.indent += 1;
        for (i, f) in s.fields.iter().enumerate() {
            self.newline();
            let _ = write!(self.out, "{} : ", f.name);
            let mult = match f.multiplicity {
                Multiplicity::Set => "set ",
                Multiplicity::Lone => "lone ",
                Multiplicity::Some => "some ",
                Multiplicity::One => "one ",
            };
            if f.columns.len() == 1 {
                self.out.push_str(mult);
                self.out.push_str(&f.columns[0]);
            } else {
                let last = f.columns.len() - 1;
                for (j, c) in f.columns.iter().enumerate() {
                    if j > 0 {
                        self.out.push_str(" -> ");
                    }
                    if j == last && f.multiplicity != Multiplicity::Set {
                        self.out.push_str(mult);
                    }
                    self.out.push_str(c);
                }
            }
            if i + 1 < s.fields.len() {
                self.out.push(',');
            }
        }
        self.indent -= 1;
        self.newline();
        self.out.push('}');
    }

    fn params(&mut self, params: &[Param]) {
        if params.is_empty() {
            return;
        }
        self.out.push('[');
        for (i, p) in params.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            let _ = write!(self.out, "{} : ", p.name);
            self.expr(&p.bound, 0);
        }
        self.out.push(']');
    }

    fn pred(&mut self, p: &PredDecl) {
        self.comment(&p.comment);
        let _ = write!(self.out, "pred {}", p.name);
        self.params(&p.params);
        self.out.push(' ');
        self.paragraph_body(&p.body);
    }

    /// Body of a fact, predicate or command: always a braced block.
    fn paragraph_body(&mut self, f: &Formula) {
        match &f.kind {
            FormulaKind::Block(items) => self.block(items),
            _ => self.block(std::slice::from_ref(f)),
        }
    }

    fn block(&mut self, items: &[Formula]) {
        if items.is_empty() {
            self.out.push_str("{}");
            return;
        }
        self.out.push('{');
        self.indent += 1;
        for f in items {
            self.newline();
            self.formula(f, 0, true);
        }
        self.indent -= 1;
        self.newline();
        self.out.push('}');
    }

    fn command(&mut self, c: &RunCommand) {
        self.comment(&c.comment);
        self.out.push_str("run");
        let named_call = !c.name.is_empty()
            && matches!(&c.body.kind, FormulaKind::Call(n, args) if *n == c.name && args.is_empty());
        if !c.name.is_empty() {
            let _ = write!(self.out, " {}", c.name);
        }
        if !named_call {
            self.out.push(' ');
            self.paragraph_body(&c.body);
        }
        if c.default_bound.is_some() || !c.scopes.is_empty() {
            self.out.push_str(" for ");
            if let Some(n) = c.default_bound {
                let _ = write!(self.out, "{n}");
                if !c.scopes.is_empty() {
                    self.out.push_str(" but ");
                }
            }
            for (i, (sig, scope)) in c.scopes.iter().enumerate() {
                if i > 0 {
                    self.out.push_str(", ");
                }
                if scope.exact {
                    self.out.push_str("exactly ");
                }
                let _ = write!(self.out, "{} {sig}", scope.bound);
            }
        }
        if let Some(e) = c.expect {
            let _ = write!(self.out, " expect {}", e.digit());
        }
    }

    /// Print `f`, parenthesizing when its level is below `min`. `tail` is
    /// false when more formula text follows at the same nesting, in which
    /// case constructs whose body extends rightwards must be closed.
    fn formula(&mut self, f: &Formula, min: u8, tail: bool) {
        let (level, open_right) = match &f.kind {
            FormulaKind::Binary(Logic::Or, ..) => (F_OR, false),
            FormulaKind::Binary(Logic::Iff, ..) => (F_IFF, false),
            FormulaKind::Binary(Logic::Implies, ..) | FormulaKind::IfElse(..) => (F_IMPLIES, false),
            FormulaKind::Binary(Logic::And, ..) => (F_AND, false),
            FormulaKind::Quant { .. } => (F_UNARY, true),
            _ => (F_UNARY, false),
        };
        let paren = level < min || (open_right && !tail);
        if paren {
            self.out.push('(');
        }
        let tail = tail || paren;
        match &f.kind {
            FormulaKind::Binary(op, a, b) => {
                let (kw, lmin, rmin) = match op {
                    Logic::Or => ("or", F_OR, F_IFF),
                    Logic::Iff => ("iff", F_IFF, F_IMPLIES),
                    Logic::Implies => ("implies", F_AND, F_IMPLIES),
                    Logic::And => ("and", F_AND, F_UNARY),
                };
                self.formula(a, lmin, false);
                let _ = write!(self.out, " {kw} ");
                self.formula(b, rmin, tail);
            }
            FormulaKind::IfElse(c, a, b) => {
                self.formula(c, F_AND, false);
                self.out.push_str(" implies ");
                // a bare implication here would capture the `else`
                let then_min = if matches!(
                    a.kind,
                    FormulaKind::Binary(Logic::Implies, ..) | FormulaKind::IfElse(..)
                ) {
                    F_AND
                } else {
                    F_IMPLIES
                };
                self.formula(a, then_min, false);
                self.out.push_str(" else ");
                self.formula(b, F_IMPLIES, tail);
            }
            FormulaKind::Not(g) => {
                self.out.push_str("not ");
                self.formula(g, F_UNARY, tail);
            }
            FormulaKind::Block(items) => self.block(items),
            FormulaKind::Quant { quant, decls, body } => {
                self.out.push_str(match quant {
                    Quantifier::All => "all ",
                    Quantifier::Some => "some ",
                    Quantifier::No => "no ",
                    Quantifier::Lone => "lone ",
                    Quantifier::One => "one ",
                });
                for (i, d) in decls.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    if d.disj {
                        self.out.push_str("disj ");
                    }
                    self.out.push_str(&d.names.join(", "));
                    self.out.push_str(" : ");
                    self.expr(&d.bound, 0);
                }
                if let FormulaKind::Block(items) = &body.kind {
                    self.out.push(' ');
                    self.block(items);
                } else {
                    self.out.push_str(" | ");
                    self.formula(body, 0, true);
                }
            }
            FormulaKind::Compare(op, a, b) => {
                self.expr(a, 0);
                self.out.push_str(match op {
                    CompareOp::In => " in ",
                    CompareOp::NotIn => " not in ",
                    CompareOp::Eq => " = ",
                    CompareOp::NotEq => " != ",
                });
                self.expr(b, 0);
            }
            FormulaKind::Mult(m, e) => {
                self.out.push_str(match m {
                    MultTest::No => "no ",
                    MultTest::Some => "some ",
                    MultTest::Lone => "lone ",
                    MultTest::One => "one ",
                });
                self.expr(e, 0);
            }
            FormulaKind::Call(n, args) => self.call(n, args),
        }
        if paren {
            self.out.push(')');
        }
    }

    fn call(&mut self, n: &str, args: &[Expr]) {
        self.out.push_str(n);
        if !args.is_empty() {
            self.out.push('[');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    self.out.push_str(", ");
                }
                self.expr(a, 0);
            }
            self.out.push(']');
        }
    }

    /// Whether a bare relation name would resolve to more than one relation.
    fn overloaded(&self, name: &str) -> bool {
        let Some(m) = self.model else { return false };
        let mut n = m.fields_named(name).count();
        if matches!(name, "next" | "first" | "last") {
            n += m.orderings.len();
        }
        n > 1
    }

    fn expr(&mut self, e: &Expr, min: u8) {
        // Qualified forms for overloaded relations of resolved trees.
        let qualified = match e {
            Expr::Field { owner, name } if self.overloaded(name) => {
                Some(Expr::binary(BinaryOp::DomainRestrict, Expr::Sig(owner.clone()), Expr::name(name.clone())))
            }
            Expr::Next(s) if self.overloaded("next") => {
                Some(Expr::binary(BinaryOp::DomainRestrict, Expr::Sig(s.clone()), Expr::name("next")))
            }
            Expr::First(s) if self.overloaded("first") => {
                Some(Expr::binary(BinaryOp::DomainRestrict, Expr::Sig(s.clone()), Expr::name("first")))
            }
            Expr::Last(s) if self.overloaded("last") => {
                Some(Expr::binary(BinaryOp::DomainRestrict, Expr::Sig(s.clone()), Expr::name("last")))
            }
            _ => None,
        };
        if let Some(q) = qualified {
            return self.expr(&q, min);
        }
        let level = expr_level(e);
        let paren = level < min;
        if paren {
            self.out.push('(');
        }
        match e {
            Expr::Name(n) | Expr::Sig(n) | Expr::Var(n) => self.out.push_str(n),
            Expr::Field { name, .. } => self.out.push_str(name),
            Expr::Next(_) => self.out.push_str("next"),
            Expr::First(_) => self.out.push_str("first"),
            Expr::Last(_) => self.out.push_str("last"),
            Expr::None => self.out.push_str("none"),
            Expr::Univ => self.out.push_str("univ"),
            Expr::Iden => self.out.push_str("iden"),
            Expr::Unary(op, a) => {
                self.out.push(match op {
                    UnaryOp::Transpose => '~',
                    UnaryOp::Closure => '^',
                    UnaryOp::ReflexiveClosure => '*',
                });
                self.expr(a, E_UNARY);
            }
            Expr::Binary(op, a, b) => {
                let level = binary_level(*op);
                let rmin = if *op == BinaryOp::Join { E_UNARY } else { level + 1 };
                self.expr(a, level);
                let sym = op.symbol();
                if matches!(op, BinaryOp::Join | BinaryOp::Product) {
                    self.out.push_str(sym);
                } else {
                    let _ = write!(self.out, " {sym} ");
                }
                if *op == BinaryOp::DomainRestrict && restricts_to_owner(a, b) {
                    self.expr(&Expr::name(bare_name(b)), rmin);
                } else {
                    self.expr(b, rmin);
                }
            }
            Expr::BoxJoin(t, args) => {
                self.expr(t, E_JOIN);
                self.out.push('[');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.expr(a, 0);
                }
                self.out.push(']');
            }
            Expr::Call(n, args) => {
                let n = n.clone();
                self.call(&n, args);
            }
        }
        if paren {
            self.out.push(')');
        }
    }
}
