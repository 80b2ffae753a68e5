//! Name resolution and arity checking.
//!
//! Every expression gets a type: its arity plus the set of top-level
//! signature products it may contain. Arity errors are always fatal.
//! Overloaded identifiers (fields sharing a name, `next` of several
//! orderings) are resolved per atomic formula: each combination of
//! candidates is checked, and a combination is preferred when none of its
//! joins, restrictions, intersections or comparisons are provably empty.
//! Exactly one surviving combination is accepted; anything else is an
//! ambiguity error.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::ast::*;
use crate::error::{ErrorKind, ParseError, TypeError};

const MAX_COMBINATIONS: usize = 512;

/// Static type of an expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Type {
    pub arity: usize,
    pub products: BTreeSet<Vec<usize>>,
}

impl Type {
    pub fn empty(arity: usize) -> Type {
        Type { arity, products: BTreeSet::new() }
    }

    fn unary(tops: impl IntoIterator<Item = usize>) -> Type {
        Type { arity: 1, products: tops.into_iter().map(|t| vec![t]).collect() }
    }

    fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    fn union(&self, other: &Type) -> Type {
        Type { arity: self.arity, products: self.products.union(&other.products).cloned().collect() }
    }

    fn intersect(&self, other: &Type) -> Type {
        Type {
            arity: self.arity,
            products: self.products.intersection(&other.products).cloned().collect(),
        }
    }

    fn product(&self, other: &Type) -> Type {
        let mut products = BTreeSet::new();
        for a in &self.products {
            for b in &other.products {
                let mut p = a.clone();
                p.extend_from_slice(b);
                products.insert(p);
            }
        }
        Type { arity: self.arity + other.arity, products }
    }

    fn join(&self, other: &Type) -> Type {
        let mut products = BTreeSet::new();
        for a in &self.products {
            for b in &other.products {
                if a.last() == b.first() {
                    let mut p = a[..a.len() - 1].to_vec();
                    p.extend_from_slice(&b[1..]);
                    products.insert(p);
                }
            }
        }
        Type { arity: self.arity + other.arity - 2, products }
    }

    fn transpose(&self) -> Type {
        Type {
            arity: 2,
            products: self.products.iter().map(|p| vec![p[1], p[0]]).collect(),
        }
    }

    fn closure(&self) -> Type {
        let mut products = self.products.clone();
        loop {
            let mut added = Vec::new();
            for a in &products {
                for b in &products {
                    if a[1] == b[0] {
                        let p = vec![a[0], b[1]];
                        if !products.contains(&p) {
                            added.push(p);
                        }
                    }
                }
            }
            if added.is_empty() {
                return Type { arity: 2, products };
            }
            products.extend(added);
        }
    }
}

/// Variable environment during resolution: innermost binding last.
pub type TypeEnv = Vec<(Ident, Type)>;

/// Arity of `e` under `env`, which maps variables to signature names.
pub fn arity_of(model: &Model, env: &BTreeMap<Ident, Ident>, e: &Expr) -> Result<usize, TypeError> {
    let r = Resolver::new(model).map_err(|e| TypeError::Other(e.message))?;
    let mut tenv = TypeEnv::new();
    for (v, s) in env {
        let top = model.top_of(s).ok_or_else(|| TypeError::UnknownName(s.clone()))?;
        tenv.push((v.clone(), Type::unary([r.top_index[top]])));
    }
    let (_, t) = r.resolve_leaf_expr(&tenv, e)?;
    Ok(t.arity)
}

/// Resolve and check a syntax-only model.
pub fn resolve_model(raw: Model) -> Result<Model, ParseError> {
    check_declarations(&raw)?;
    let resolver = Resolver::new(&raw)?;
    let mut m = raw.clone();
    for f in &mut m.facts {
        f.body = resolver.resolve_formula(&TypeEnv::new(), &f.body)?;
    }
    for p in &mut m.preds {
        *p = resolver.resolve_pred(p)?;
    }
    m.funs = resolver.funs_resolved.clone();
    check_pred_recursion(&m)?;
    let mut commands = Vec::new();
    for c in std::mem::take(&mut m.commands) {
        commands.push(resolver.resolve_command(c)?);
    }
    m.commands = commands;
    Ok(m)
}

fn decl_error(span: Span, msg: impl Into<String>) -> ParseError {
    ParseError::new(ErrorKind::Resolution, span.0, msg)
}

fn check_declarations(m: &Model) -> Result<(), ParseError> {
    let mut seen = BTreeSet::new();
    for s in &m.sigs {
        if !seen.insert(s.name.as_str()) {
            return Err(decl_error(s.span, format!("signature `{}` declared twice", s.name)));
        }
    }
    for s in &m.sigs {
        if let Some(p) = s.parent() {
            let Some(parent) = m.sig(p) else {
                return Err(decl_error(s.span, format!("unknown parent signature `{p}` of `{}`", s.name)));
            };
            if matches!(s.kind, SigKind::Extension(_)) && matches!(parent.kind, SigKind::Subset(_)) {
                return Err(decl_error(
                    s.span,
                    format!("`{}` cannot extend subset signature `{p}`", s.name),
                ));
            }
        }
        // cycle check: walking up must terminate within |sigs| steps
        let mut cur = s;
        for step in 0..=m.sigs.len() {
            match cur.parent().and_then(|p| m.sig(p)) {
                Some(p) => cur = p,
                None => break,
            }
            if step == m.sigs.len() {
                return Err(decl_error(s.span, format!("cyclic signature hierarchy at `{}`", s.name)));
            }
        }
        let mut fields = BTreeSet::new();
        for f in &s.fields {
            if !fields.insert(f.name.as_str()) {
                return Err(decl_error(f.span, format!("field `{}` declared twice in `{}`", f.name, s.name)));
            }
            for c in &f.columns {
                if m.sig(c).is_none() {
                    return Err(decl_error(f.span, format!("unknown signature `{c}` in field `{}`", f.name)));
                }
            }
        }
    }
    let mut ordered = BTreeSet::new();
    for o in &m.orderings {
        match m.sig(o) {
            None => return Err(decl_error(Span::default(), format!("ordering on unknown signature `{o}`"))),
            Some(s) if s.kind != SigKind::TopLevel => {
                return Err(decl_error(s.span, format!("ordering is only supported on top-level signatures, not `{o}`")))
            }
            _ => {}
        }
        if !ordered.insert(o) {
            return Err(decl_error(Span::default(), format!("signature `{o}` ordered twice")));
        }
    }
    let mut names = BTreeSet::new();
    for n in m.preds.iter().map(|p| &p.name).chain(m.funs.iter().map(|f| &f.name)) {
        if !names.insert(n) {
            return Err(decl_error(Span::default(), format!("`{n}` declared twice")));
        }
    }
    Ok(())
}

fn check_pred_recursion(m: &Model) -> Result<(), ParseError> {
    fn calls(f: &Formula, out: &mut Vec<Ident>) {
        match &f.kind {
            FormulaKind::Call(n, _) => out.push(n.clone()),
            FormulaKind::Not(g) => calls(g, out),
            FormulaKind::Binary(_, a, b) => {
                calls(a, out);
                calls(b, out);
            }
            FormulaKind::IfElse(a, b, c) => {
                calls(a, out);
                calls(b, out);
                calls(c, out);
            }
            FormulaKind::Block(fs) => fs.iter().for_each(|g| calls(g, out)),
            FormulaKind::Quant { body, .. } => calls(body, out),
            FormulaKind::Compare(..) | FormulaKind::Mult(..) => {}
        }
    }
    let graph: HashMap<&str, Vec<Ident>> = m
        .preds
        .iter()
        .map(|p| {
            let mut out = Vec::new();
            calls(&p.body, &mut out);
            (p.name.as_str(), out)
        })
        .collect();
    fn visit<'a>(
        n: &'a str,
        graph: &'a HashMap<&str, Vec<Ident>>,
        state: &mut HashMap<&'a str, u8>,
    ) -> Result<(), String> {
        match state.get(n) {
            Some(1) => return Err(n.to_string()),
            Some(2) => return Ok(()),
            _ => {}
        }
        state.insert(n, 1);
        for c in graph.get(n).into_iter().flatten() {
            visit(c, graph, state)?;
        }
        state.insert(n, 2);
        Ok(())
    }
    let mut state = HashMap::new();
    for p in &m.preds {
        visit(&p.name, &graph, &mut state)
            .map_err(|n| decl_error(Span::default(), format!("predicate `{n}` is recursive")))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum Candidate {
    Sig(Ident),
    Field(Ident, Ident),
    Next(Ident),
    First(Ident),
    Last(Ident),
    Fun(Ident),
}

/// Resolution context for one model.
pub struct Resolver<'m> {
    model: &'m Model,
    pub(crate) top_index: HashMap<&'m str, usize>,
    pred_params: HashMap<Ident, Vec<Type>>,
    fun_sigs: HashMap<Ident, (Vec<Type>, Type)>,
    funs_resolved: Vec<FunDecl>,
}

struct Choices {
    picks: Vec<usize>,
    cursor: usize,
    strict: bool,
}

impl Choices {
    fn next(&mut self) -> usize {
        let p = self.picks.get(self.cursor).copied().unwrap_or(0);
        self.cursor += 1;
        p
    }
}

fn irrelevant(op: &str) -> TypeError {
    TypeError::Other(format!("`{op}` is always empty"))
}

impl<'m> Resolver<'m> {
    pub fn new(model: &'m Model) -> Result<Resolver<'m>, ParseError> {
        let top_index = model
            .top_level()
            .enumerate()
            .map(|(i, s)| (s.name.as_str(), i))
            .collect();
        let mut r = Resolver {
            model,
            top_index,
            pred_params: HashMap::new(),
            fun_sigs: HashMap::new(),
            funs_resolved: Vec::new(),
        };
        for f in &model.funs {
            let (params, ptypes, env) = r.resolve_params(&f.params)?;
            let span = SourceSpan::default();
            let (body, bt) = r.resolve_leaf_expr(&env, &f.body).map_err(|e| e.at(span))?;
            let (result, rt) = r.resolve_leaf_expr(&env, &f.result).map_err(|e| e.at(span))?;
            if rt.arity != bt.arity {
                return Err(TypeError::ArityMismatch {
                    op: format!("fun {}", f.name),
                    left: rt.arity,
                    right: bt.arity,
                }
                .at(span));
            }
            r.fun_sigs.insert(f.name.clone(), (ptypes, bt));
            r.funs_resolved.push(FunDecl { name: f.name.clone(), params, result, body });
        }
        for p in &model.preds {
            let (_, ptypes, _) = r.resolve_params(&p.params)?;
            r.pred_params.insert(p.name.clone(), ptypes);
        }
        Ok(r)
    }

    fn resolve_params(&self, params: &[Param]) -> Result<(Vec<Param>, Vec<Type>, TypeEnv), ParseError> {
        let mut env = TypeEnv::new();
        let mut out = Vec::new();
        let mut types = Vec::new();
        for p in params {
            let (bound, t) = self
                .resolve_leaf_expr(&TypeEnv::new(), &p.bound)
                .map_err(|e| e.at(SourceSpan::default()))?;
            env.push((p.name.clone(), t.clone()));
            types.push(t);
            out.push(Param { name: p.name.clone(), bound });
        }
        Ok((out, types, env))
    }

    fn sig_type(&self, name: &str) -> Type {
        let top = self.model.top_of(name).expect("resolved signature");
        Type::unary([self.top_index[top]])
    }

    fn univ_type(&self) -> Type {
        Type::unary(0..self.top_index.len())
    }

    fn candidates(&self, name: &str) -> Vec<Candidate> {
        if self.model.sig(name).is_some() {
            return vec![Candidate::Sig(name.to_string())];
        }
        let mut out: Vec<Candidate> = self
            .model
            .fields_named(name)
            .map(|f| Candidate::Field(f.owner.clone(), f.name.clone()))
            .collect();
        for o in &self.model.orderings {
            match name {
                "next" => out.push(Candidate::Next(o.clone())),
                "first" => out.push(Candidate::First(o.clone())),
                "last" => out.push(Candidate::Last(o.clone())),
                _ => {}
            }
        }
        if out.is_empty() {
            if let Some(f) = self.model.fun(name) {
                if f.params.is_empty() {
                    out.push(Candidate::Fun(name.to_string()));
                }
            }
        }
        out
    }

    fn lookup<'e>(env: &'e TypeEnv, name: &str) -> Option<&'e Type> {
        env.iter().rev().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Count the overloaded identifiers of `e` in resolution order.
    fn ambiguous_sites(&self, env: &TypeEnv, e: &Expr, out: &mut Vec<(Ident, usize)>) {
        match e {
            Expr::Name(n) => {
                if Self::lookup(env, n).is_none() {
                    let c = self.candidates(n).len();
                    if c > 1 {
                        out.push((n.clone(), c));
                    }
                }
            }
            Expr::Unary(_, a) => self.ambiguous_sites(env, a, out),
            Expr::Binary(_, a, b) => {
                self.ambiguous_sites(env, a, out);
                self.ambiguous_sites(env, b, out);
            }
            Expr::BoxJoin(t, args) => {
                let is_fun = matches!(&**t, Expr::Name(n)
                    if Self::lookup(env, n).is_none() && self.model.fun(n).is_some() && self.candidates(n).len() <= 1);
                if !is_fun {
                    self.ambiguous_sites(env, t, out);
                }
                for a in args {
                    self.ambiguous_sites(env, a, out);
                }
            }
            Expr::Call(_, args) => {
                for a in args {
                    self.ambiguous_sites(env, a, out);
                }
            }
            _ => {}
        }
    }

    fn expr(&self, env: &TypeEnv, e: &Expr, ch: &mut Choices) -> Result<(Expr, Type), TypeError> {
        match e {
            Expr::Name(n) => {
                if let Some(t) = Self::lookup(env, n) {
                    return Ok((Expr::Var(n.clone()), t.clone()));
                }
                let cands = self.candidates(n);
                if cands.is_empty() {
                    if self.model.pred(n).is_some() {
                        return Err(TypeError::Other(format!("predicate `{n}` used as an expression")));
                    }
                    if self.model.fun(n).is_some() {
                        return Err(TypeError::Other(format!("function `{n}` needs arguments")));
                    }
                    return Err(TypeError::UnknownName(n.clone()));
                }
                let pick = if cands.len() > 1 { ch.next() } else { 0 };
                let resolved = match &cands[pick.min(cands.len() - 1)] {
                    Candidate::Sig(s) => Expr::Sig(s.clone()),
                    Candidate::Field(o, f) => Expr::Field { owner: o.clone(), name: f.clone() },
                    Candidate::Next(s) => Expr::Next(s.clone()),
                    Candidate::First(s) => Expr::First(s.clone()),
                    Candidate::Last(s) => Expr::Last(s.clone()),
                    Candidate::Fun(f) => Expr::Call(f.clone(), Vec::new()),
                };
                self.expr(env, &resolved, ch)
            }
            Expr::Sig(s) => {
                if self.model.sig(s).is_none() {
                    return Err(TypeError::UnknownName(s.clone()));
                }
                Ok((e.clone(), self.sig_type(s)))
            }
            Expr::Field { owner, name } => {
                let f = self
                    .model
                    .field(owner, name)
                    .ok_or_else(|| TypeError::UnknownName(format!("{owner}.{name}")))?;
                let mut t = self.sig_type(&f.owner);
                for c in &f.columns {
                    t = t.product(&self.sig_type(c));
                }
                Ok((e.clone(), t))
            }
            Expr::Var(v) => Self::lookup(env, v)
                .map(|t| (e.clone(), t.clone()))
                .ok_or_else(|| TypeError::UnknownName(v.clone())),
            Expr::Next(s) | Expr::First(s) | Expr::Last(s) => {
                if !self.model.is_ordered(s) {
                    return Err(TypeError::Other(format!("signature `{s}` is not ordered")));
                }
                let t = self.sig_type(s);
                Ok((e.clone(), if matches!(e, Expr::Next(_)) { t.product(&t) } else { t }))
            }
            Expr::None => Ok((Expr::None, Type::empty(1))),
            Expr::Univ => Ok((Expr::Univ, self.univ_type())),
            Expr::Iden => {
                let products = (0..self.top_index.len()).map(|t| vec![t, t]).collect();
                Ok((Expr::Iden, Type { arity: 2, products }))
            }
            Expr::Unary(op, a) => {
                let (a, t) = self.expr(env, a, ch)?;
                let sym = match op {
                    UnaryOp::Transpose => "~",
                    UnaryOp::Closure => "^",
                    UnaryOp::ReflexiveClosure => "*",
                };
                if t.arity != 2 {
                    return Err(TypeError::BadArity {
                        op: sym.into(),
                        expected: "a binary relation".into(),
                        found: t.arity,
                    });
                }
                let rt = match op {
                    UnaryOp::Transpose => t.transpose(),
                    UnaryOp::Closure => t.closure(),
                    UnaryOp::ReflexiveClosure => {
                        let iden = Type {
                            arity: 2,
                            products: (0..self.top_index.len()).map(|t| vec![t, t]).collect(),
                        };
                        t.closure().union(&iden)
                    }
                };
                Ok((Expr::unary(*op, a), rt))
            }
            Expr::Binary(op, a, b) => {
                let (a, ta) = self.expr(env, a, ch)?;
                let (b, tb) = self.expr(env, b, ch)?;
                let sym = op.symbol();
                let both = !ta.is_empty() && !tb.is_empty();
                let t = match op {
                    BinaryOp::Union | BinaryOp::Difference | BinaryOp::Intersection => {
                        if ta.arity != tb.arity {
                            return Err(TypeError::ArityMismatch {
                                op: sym.into(),
                                left: ta.arity,
                                right: tb.arity,
                            });
                        }
                        match op {
                            BinaryOp::Union => ta.union(&tb),
                            BinaryOp::Difference => ta,
                            _ => {
                                let t = ta.intersect(&tb);
                                if ch.strict && both && t.is_empty() {
                                    return Err(irrelevant(sym));
                                }
                                t
                            }
                        }
                    }
                    BinaryOp::Product => ta.product(&tb),
                    BinaryOp::Join => {
                        if ta.arity + tb.arity < 3 {
                            return Err(TypeError::ArityMismatch {
                                op: sym.into(),
                                left: ta.arity,
                                right: tb.arity,
                            });
                        }
                        let t = ta.join(&tb);
                        if ch.strict && both && t.is_empty() {
                            return Err(irrelevant(sym));
                        }
                        t
                    }
                    BinaryOp::DomainRestrict => {
                        if ta.arity != 1 {
                            return Err(TypeError::BadArity {
                                op: sym.into(),
                                expected: "a set on the left".into(),
                                found: ta.arity,
                            });
                        }
                        let keep: BTreeSet<usize> = ta.products.iter().map(|p| p[0]).collect();
                        let t = Type {
                            arity: tb.arity,
                            products: tb.products.iter().filter(|p| keep.contains(&p[0])).cloned().collect(),
                        };
                        if ch.strict && both && t.is_empty() {
                            return Err(irrelevant(sym));
                        }
                        t
                    }
                    BinaryOp::RangeRestrict => {
                        if tb.arity != 1 {
                            return Err(TypeError::BadArity {
                                op: sym.into(),
                                expected: "a set on the right".into(),
                                found: tb.arity,
                            });
                        }
                        let keep: BTreeSet<usize> = tb.products.iter().map(|p| p[0]).collect();
                        let t = Type {
                            arity: ta.arity,
                            products: ta
                                .products
                                .iter()
                                .filter(|p| keep.contains(p.last().unwrap()))
                                .cloned()
                                .collect(),
                        };
                        if ch.strict && both && t.is_empty() {
                            return Err(irrelevant(sym));
                        }
                        t
                    }
                };
                Ok((Expr::binary(*op, a, b), t))
            }
            Expr::BoxJoin(target, args) => {
                if let Expr::Name(n) = &**target {
                    if Self::lookup(env, n).is_none()
                        && self.model.fun(n).is_some()
                        && self.candidates(n).len() <= 1
                    {
                        return self.expr(env, &Expr::Call(n.clone(), args.clone()), ch);
                    }
                    if Self::lookup(env, n).is_none() && self.model.pred(n).is_some() {
                        return Err(TypeError::Other(format!("predicate `{n}` used as an expression")));
                    }
                }
                // e[a, b] = b.(a.e); resolve in source order
                let (t, tt) = self.expr(env, target, ch)?;
                let mut resolved_args = Vec::new();
                for a in args {
                    resolved_args.push(self.expr(env, a, ch)?);
                }
                let mut e_acc = t;
                let mut t_acc = tt;
                for (a, ta) in resolved_args {
                    if ta.arity + t_acc.arity < 3 {
                        return Err(TypeError::ArityMismatch { op: "[]".into(), left: t_acc.arity, right: ta.arity });
                    }
                    let nt = ta.join(&t_acc);
                    if ch.strict && !ta.is_empty() && !t_acc.is_empty() && nt.is_empty() {
                        return Err(irrelevant("[]"));
                    }
                    e_acc = Expr::binary(BinaryOp::Join, a, e_acc);
                    t_acc = nt;
                }
                Ok((e_acc, t_acc))
            }
            Expr::Call(n, args) => {
                let (ptypes, rt) = self
                    .fun_sigs
                    .get(n)
                    .ok_or_else(|| TypeError::Other(format!("`{n}` is not a function defined before its use")))?
                    .clone();
                if ptypes.len() != args.len() {
                    return Err(TypeError::Other(format!(
                        "function `{n}` expects {} arguments, got {}",
                        ptypes.len(),
                        args.len()
                    )));
                }
                let mut out = Vec::new();
                for (a, pt) in args.iter().zip(&ptypes) {
                    let (a, ta) = self.expr(env, a, ch)?;
                    if ta.arity != pt.arity {
                        return Err(TypeError::ArityMismatch {
                            op: format!("{n}[]"),
                            left: pt.arity,
                            right: ta.arity,
                        });
                    }
                    out.push(a);
                }
                Ok((Expr::Call(n.clone(), out), rt))
            }
        }
    }

    /// Resolve one atomic construct, trying every combination of overload
    /// candidates. `run` performs the resolution under a given choice vector.
    fn with_overloads<T>(
        &self,
        sites: Vec<(Ident, usize)>,
        run: impl Fn(&mut Choices) -> Result<T, TypeError>,
    ) -> Result<T, TypeError> {
        if sites.is_empty() {
            return run(&mut Choices { picks: Vec::new(), cursor: 0, strict: false });
        }
        let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
        for (_, n) in &sites {
            let mut next = Vec::new();
            for c in &combos {
                for i in 0..*n {
                    let mut c = c.clone();
                    c.push(i);
                    next.push(c);
                }
            }
            combos = next;
            if combos.len() > MAX_COMBINATIONS {
                return Err(TypeError::Ambiguous(sites[0].0.clone()));
            }
        }
        let mut strict_ok = Vec::new();
        for c in &combos {
            if let Ok(v) = run(&mut Choices { picks: c.clone(), cursor: 0, strict: true }) {
                strict_ok.push((c.clone(), v));
            }
        }
        let ambiguous = |oks: &[Vec<usize>]| -> TypeError {
            let i = (0..sites.len()).find(|&i| oks.iter().any(|c| c[i] != oks[0][i])).unwrap_or(0);
            TypeError::Ambiguous(sites[i].0.clone())
        };
        match strict_ok.len() {
            1 => return Ok(strict_ok.pop().unwrap().1),
            n if n > 1 => {
                let picks: Vec<Vec<usize>> = strict_ok.into_iter().map(|(c, _)| c).collect();
                return Err(ambiguous(&picks));
            }
            _ => {}
        }
        let mut lax_ok = Vec::new();
        let mut first_err = None;
        for c in &combos {
            match run(&mut Choices { picks: c.clone(), cursor: 0, strict: false }) {
                Ok(v) => lax_ok.push((c.clone(), v)),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        match lax_ok.len() {
            0 => Err(first_err.expect("at least one combination")),
            1 => Ok(lax_ok.pop().unwrap().1),
            _ => {
                let picks: Vec<Vec<usize>> = lax_ok.into_iter().map(|(c, _)| c).collect();
                Err(ambiguous(&picks))
            }
        }
    }

    pub(crate) fn resolve_leaf_expr(&self, env: &TypeEnv, e: &Expr) -> Result<(Expr, Type), TypeError> {
        let mut sites = Vec::new();
        self.ambiguous_sites(env, e, &mut sites);
        self.with_overloads(sites, |ch| self.expr(env, e, ch))
    }

    fn check_compare(op: CompareOp, ta: &Type, tb: &Type, strict: bool) -> Result<(), TypeError> {
        let sym = match op {
            CompareOp::In => "in",
            CompareOp::NotIn => "not in",
            CompareOp::Eq => "=",
            CompareOp::NotEq => "!=",
        };
        if ta.arity != tb.arity {
            return Err(TypeError::ArityMismatch { op: sym.into(), left: ta.arity, right: tb.arity });
        }
        if strict && !ta.is_empty() && !tb.is_empty() && ta.intersect(tb).is_empty() {
            return Err(irrelevant(sym));
        }
        Ok(())
    }

    /// Resolve a formula under `env`.
    pub fn resolve_formula(&self, env: &TypeEnv, f: &Formula) -> Result<Formula, ParseError> {
        let span = f.source_span();
        let kind = match &f.kind {
            FormulaKind::Compare(op, a, b) => {
                let mut sites = Vec::new();
                self.ambiguous_sites(env, a, &mut sites);
                self.ambiguous_sites(env, b, &mut sites);
                let (a, b) = self
                    .with_overloads(sites, |ch| {
                        let (a, ta) = self.expr(env, a, ch)?;
                        let (b, tb) = self.expr(env, b, ch)?;
                        Self::check_compare(*op, &ta, &tb, ch.strict)?;
                        Ok((a, b))
                    })
                    .map_err(|e| e.at(span))?;
                FormulaKind::Compare(*op, a, b)
            }
            FormulaKind::Mult(m, e) => {
                let (e, _) = self.resolve_leaf_expr(env, e).map_err(|e| e.at(span))?;
                FormulaKind::Mult(*m, e)
            }
            FormulaKind::Not(g) => FormulaKind::Not(Box::new(self.resolve_formula(env, g)?)),
            FormulaKind::Binary(op, a, b) => FormulaKind::Binary(
                *op,
                Box::new(self.resolve_formula(env, a)?),
                Box::new(self.resolve_formula(env, b)?),
            ),
            FormulaKind::IfElse(a, b, c) => FormulaKind::IfElse(
                Box::new(self.resolve_formula(env, a)?),
                Box::new(self.resolve_formula(env, b)?),
                Box::new(self.resolve_formula(env, c)?),
            ),
            FormulaKind::Block(fs) => FormulaKind::Block(
                fs.iter().map(|g| self.resolve_formula(env, g)).collect::<Result<_, _>>()?,
            ),
            FormulaKind::Quant { quant, decls, body } => {
                let mut env = env.clone();
                let mut names = BTreeSet::new();
                let mut out = Vec::new();
                for d in decls {
                    let (bound, t) = self.resolve_leaf_expr(&env, &d.bound).map_err(|e| e.at(span))?;
                    if t.arity != 1 {
                        return Err(TypeError::BadArity {
                            op: "quantifier bound".into(),
                            expected: "a set".into(),
                            found: t.arity,
                        }
                        .at(span));
                    }
                    for n in &d.names {
                        if !names.insert(n.clone()) {
                            return Err(ParseError::new(
                                ErrorKind::Resolution,
                                span,
                                format!("variable `{n}` declared twice in one quantifier"),
                            ));
                        }
                    }
                    for n in &d.names {
                        env.push((n.clone(), t.clone()));
                    }
                    out.push(Decl { disj: d.disj, names: d.names.clone(), bound });
                }
                let body = self.resolve_formula(&env, body)?;
                FormulaKind::Quant { quant: *quant, decls: out, body: Box::new(body) }
            }
            FormulaKind::Call(n, args) => {
                let Some(ptypes) = self.pred_params.get(n) else {
                    let msg = if Self::lookup(env, n).is_some() || !self.candidates(n).is_empty() {
                        format!("`{n}` is not a predicate")
                    } else {
                        format!("unknown predicate `{n}`")
                    };
                    return Err(ParseError::new(ErrorKind::Resolution, span, msg));
                };
                if ptypes.len() != args.len() {
                    return Err(ParseError::new(
                        ErrorKind::Resolution,
                        span,
                        format!("predicate `{n}` expects {} arguments, got {}", ptypes.len(), args.len()),
                    ));
                }
                let mut out = Vec::new();
                for (a, pt) in args.iter().zip(ptypes) {
                    let (a, ta) = self.resolve_leaf_expr(env, a).map_err(|e| e.at(span))?;
                    if ta.arity != pt.arity {
                        return Err(TypeError::ArityMismatch {
                            op: format!("{n}[]"),
                            left: pt.arity,
                            right: ta.arity,
                        }
                        .at(span));
                    }
                    out.push(a);
                }
                FormulaKind::Call(n.clone(), out)
            }
        };
        Ok(Formula { kind, span: f.span })
    }

    pub fn resolve_formula_closed(&self, f: Formula) -> Result<Formula, ParseError> {
        self.resolve_formula(&TypeEnv::new(), &f)
    }

    fn resolve_pred(&self, p: &PredDecl) -> Result<PredDecl, ParseError> {
        let (params, _, env) = self.resolve_params(&p.params)?;
        Ok(PredDecl {
            name: p.name.clone(),
            params,
            body: self.resolve_formula(&env, &p.body)?,
            comment: p.comment.clone(),
        })
    }

    /// Resolve a predicate that is not part of the model. It may call the
    /// model's predicates but cannot be called by them.
    pub fn resolve_standalone_pred(&self, p: PredDecl) -> Result<PredDecl, ParseError> {
        self.resolve_pred(&p)
    }

    pub fn resolve_command(&self, c: RunCommand) -> Result<RunCommand, ParseError> {
        let span = c.span.0;
        for k in c.scopes.keys() {
            match self.model.sig(k) {
                None => {
                    return Err(ParseError::new(
                        ErrorKind::Resolution,
                        span,
                        format!("scope given for unknown signature `{k}`"),
                    ))
                }
                Some(s) if s.kind != SigKind::TopLevel => {
                    return Err(ParseError::new(
                        ErrorKind::Resolution,
                        span,
                        format!("scope given for `{k}`, which is not a top-level signature"),
                    ))
                }
                _ => {}
            }
        }
        let body = self.resolve_formula(&TypeEnv::new(), &c.body)?;
        Ok(RunCommand { body, ..c })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expr_syntax, parse_formula, parse_model};

    const COURSES: &str = "open util/ordering[Grade]
sig Person { teaches : set Course, enrolled : set Course, projects : set Project }
sig Professor, Student in Person {}
sig Course { projects : set Project, grades : Person -> Grade }
sig Project {}
sig Grade {}
fact Enrollment {}";

    fn arity(src: &str) -> Result<usize, TypeError> {
        let m = parse_model(COURSES).unwrap();
        arity_of(&m, &BTreeMap::new(), &parse_expr_syntax(src).unwrap())
    }

    #[test]
    fn arities_of_declared_relations() {
        assert_eq!(arity("enrolled"), Ok(2));
        assert_eq!(arity("grades"), Ok(3));
        assert_eq!(arity("none->none->none"), Ok(3));
        assert_eq!(arity("Grade <: next"), Ok(2));
    }

    #[test]
    fn arity_mismatch_reports_operands() {
        let e = arity("Person + teaches").unwrap_err();
        assert_eq!(e, TypeError::ArityMismatch { op: "+".into(), left: 1, right: 2 });
        assert_eq!(e.kind(), ErrorKind::Arity);
    }

    #[test]
    fn overloaded_field_needs_disambiguation() {
        assert_eq!(arity("projects"), Err(TypeError::Ambiguous("projects".into())));
        assert_eq!(arity("Person <: projects"), Ok(2));
        let m = parse_model(COURSES).unwrap();
        let f = parse_formula(&m, "Course <: projects = none->none").unwrap();
        let FormulaKind::Compare(_, Expr::Binary(_, _, r), _) = f.kind else { panic!() };
        assert_eq!(*r, Expr::Field { owner: "Course".into(), name: "projects".into() });
    }

    #[test]
    fn join_context_resolves_overloading() {
        let m = parse_model(COURSES).unwrap();
        let f = parse_formula(&m, "all c : Course | some c.projects").unwrap();
        let FormulaKind::Quant { body, .. } = f.kind else { panic!() };
        let FormulaKind::Mult(_, Expr::Binary(_, _, r)) = body.kind else { panic!() };
        assert_eq!(*r, Expr::Field { owner: "Course".into(), name: "projects".into() });
        // both candidates join with a Project on the right
        let e = parse_formula(&m, "all p : Project | one projects.p").unwrap_err();
        assert!(e.message.contains("ambiguous"), "{}", e.message);
    }

    #[test]
    fn arity_errors_inside_formulas() {
        let m = parse_model(COURSES).unwrap();
        let e = parse_formula(&m, "teaches = none").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Arity);
        assert!(e.message.contains("2 and 1"), "{}", e.message);
    }

    #[test]
    fn env_maps_variables_to_signatures() {
        let m = parse_model(COURSES).unwrap();
        let env = BTreeMap::from([("p".to_string(), "Student".to_string())]);
        assert_eq!(arity_of(&m, &env, &parse_expr_syntax("p.grades").unwrap()), Ok(2));
        assert_eq!(arity_of(&m, &env, &parse_expr_syntax("p.enrolled").unwrap()), Ok(1));
    }

    #[test]
    fn declaration_errors() {
        let bad_parent = COURSES.replace("in Person", "in Human");
        let e = parse_model(&bad_parent).unwrap_err();
        assert_eq!(e.kind, ErrorKind::Resolution);
        assert!(e.message.contains("Human"));
        let cyclic = "sig A extends B {} sig B extends A {}";
        assert!(parse_model(cyclic).unwrap_err().message.contains("cyclic"));
        let dup = "sig A {} sig A {}";
        assert!(parse_model(dup).is_err());
        let rec = "sig A {} pred p { q } pred q { p }";
        assert!(parse_model(rec).unwrap_err().message.contains("recursive"));
    }

    #[test]
    fn quantifier_bounds_must_be_sets() {
        let m = parse_model(COURSES).unwrap();
        assert!(parse_formula(&m, "some x : teaches | no x").is_err());
        let e = parse_formula(&m, "some x : Person, x : Course | no x").unwrap_err();
        assert!(e.message.contains("twice"));
    }

    #[test]
    fn scopes_must_name_top_level_signatures() {
        let m = parse_model(COURSES).unwrap();
        let e = crate::parser::parse_command(&m, "run { } for 1 Student expect 1").unwrap_err();
        assert!(e.message.contains("top-level"));
    }
}
