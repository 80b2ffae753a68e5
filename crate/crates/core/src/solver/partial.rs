//! Three-valued evaluation over partially decided instances.
//!
//! Every relation carries a lower bound (tuples known to be present) and an
//! upper bound (tuples that may be present). Expressions evaluate to bounds
//! containing the exact value of every completion; formulas evaluate to
//! true or false only when all completions agree.

use std::collections::HashMap;

use crate::ast::*;
use crate::semantics::{AtomId, EvalError, RelationValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    True,
    False,
    Unknown,
}

impl Tri {
    pub fn from_bool(b: bool) -> Tri {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }

    pub fn and(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::False, _) | (_, Tri::False) => Tri::False,
            (Tri::True, Tri::True) => Tri::True,
            _ => Tri::Unknown,
        }
    }

    pub fn or(self, other: Tri) -> Tri {
        self.not().and(other.not()).not()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bounds {
    pub lo: RelationValue,
    pub hi: RelationValue,
}

impl Bounds {
    pub fn exact(v: RelationValue) -> Bounds {
        Bounds { lo: v.clone(), hi: v }
    }

    pub fn arity(&self) -> usize {
        self.lo.arity
    }

    fn map2(&self, other: &Bounds, f: impl Fn(&RelationValue, &RelationValue) -> RelationValue) -> Bounds {
        Bounds { lo: f(&self.lo, &other.lo), hi: f(&self.hi, &other.hi) }
    }
}

/// Bounds for every relation of a model.
#[derive(Debug, Clone)]
pub struct PartialInstance {
    pub sigs: HashMap<Ident, Bounds>,
    pub fields: HashMap<Ident, HashMap<Ident, Bounds>>,
    pub next: HashMap<Ident, RelationValue>,
    /// Union of the top-level signatures, which the search always fixes.
    pub univ: RelationValue,
}

impl PartialInstance {
    pub fn field(&self, owner: &str, name: &str) -> Option<&Bounds> {
        self.fields.get(owner)?.get(name)
    }

    pub fn field_mut(&mut self, owner: &str, name: &str) -> Option<&mut Bounds> {
        self.fields.get_mut(owner)?.get_mut(name)
    }
}

pub type PEnv = Vec<(Ident, Bounds)>;

pub struct PartialEvaluator<'a> {
    model: &'a Model,
    inst: &'a PartialInstance,
}

impl<'a> PartialEvaluator<'a> {
    pub fn new(model: &'a Model, inst: &'a PartialInstance) -> PartialEvaluator<'a> {
        PartialEvaluator { model, inst }
    }

    fn lookup<'e>(env: &'e PEnv, n: &str) -> Option<&'e Bounds> {
        env.iter().rev().find(|(v, _)| v == n).map(|(_, b)| b)
    }

    fn iden(&self) -> RelationValue {
        RelationValue::from_tuples(2, self.inst.univ.atoms().map(|a| vec![a, a]))
    }

    pub fn expr(&self, env: &mut PEnv, e: &Expr) -> Result<Bounds, EvalError> {
        Ok(match e {
            Expr::Name(n) => {
                if let Some(b) = Self::lookup(env, n) {
                    return Ok(b.clone());
                }
                if self.model.sig(n).is_some() {
                    return self.expr(env, &Expr::Sig(n.clone()));
                }
                let mut fs = self.model.fields_named(n);
                match (fs.next(), fs.next()) {
                    (Some(f), None) => {
                        return self.expr(env, &Expr::Field { owner: f.owner.clone(), name: f.name.clone() })
                    }
                    _ => return Err(EvalError::Unresolved(n.clone())),
                }
            }
            Expr::Sig(s) => self.inst.sigs.get(s).cloned().ok_or_else(|| EvalError::Missing(s.clone()))?,
            Expr::Field { owner, name } => self
                .inst
                .field(owner, name)
                .cloned()
                .ok_or_else(|| EvalError::Missing(format!("{owner}.{name}")))?,
            Expr::Var(v) => Self::lookup(env, v).cloned().ok_or_else(|| EvalError::Unbound(v.clone()))?,
            Expr::Next(s) => Bounds::exact(self.next_of(s)),
            Expr::First(s) | Expr::Last(s) => {
                let next = self.next_of(s);
                let col = if matches!(e, Expr::First(_)) { 1 } else { 0 };
                let excluded = RelationValue::set(next.tuples.iter().map(|t| t[col]));
                let sig = self.inst.sigs.get(s).ok_or_else(|| EvalError::Missing(s.clone()))?;
                Bounds { lo: sig.lo.difference(&excluded), hi: sig.hi.difference(&excluded) }
            }
            Expr::None => Bounds::exact(RelationValue::empty(1)),
            Expr::Univ => Bounds::exact(self.inst.univ.clone()),
            Expr::Iden => Bounds::exact(self.iden()),
            Expr::Unary(op, a) => {
                let b = self.expr(env, a)?;
                match op {
                    UnaryOp::Transpose => Bounds { lo: b.lo.transpose(), hi: b.hi.transpose() },
                    UnaryOp::Closure => Bounds { lo: b.lo.closure(), hi: b.hi.closure() },
                    UnaryOp::ReflexiveClosure => {
                        let iden = self.iden();
                        Bounds { lo: b.lo.closure().union(&iden), hi: b.hi.closure().union(&iden) }
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let a = self.expr(env, a)?;
                let b = self.expr(env, b)?;
                match op {
                    BinaryOp::Union => a.map2(&b, RelationValue::union),
                    BinaryOp::Intersection => a.map2(&b, RelationValue::intersection),
                    BinaryOp::Difference => Bounds { lo: a.lo.difference(&b.hi), hi: a.hi.difference(&b.lo) },
                    BinaryOp::Product => a.map2(&b, RelationValue::product),
                    BinaryOp::Join => a.map2(&b, RelationValue::join),
                    BinaryOp::DomainRestrict => a.map2(&b, RelationValue::domain_restrict),
                    BinaryOp::RangeRestrict => a.map2(&b, RelationValue::range_restrict),
                }
            }
            Expr::BoxJoin(t, args) => {
                if let Expr::Name(n) = &**t {
                    if Self::lookup(env, n).is_none() && self.model.fun(n).is_some() {
                        return self.expr(env, &Expr::Call(n.clone(), args.clone()));
                    }
                }
                let mut acc = self.expr(env, t)?;
                for a in args {
                    acc = self.expr(env, a)?.map2(&acc, RelationValue::join);
                }
                acc
            }
            Expr::Call(n, args) => {
                let f = self.model.fun(n).ok_or_else(|| EvalError::UnknownCall(n.clone()))?;
                let mut inner = PEnv::new();
                for (p, a) in f.params.iter().zip(args) {
                    inner.push((p.name.clone(), self.expr(env, a)?));
                }
                self.expr(&mut inner, &f.body)?
            }
        })
    }

    fn next_of(&self, s: &str) -> RelationValue {
        self.inst.next.get(s).cloned().unwrap_or_else(|| RelationValue::empty(2))
    }

    pub fn formula(&self, env: &mut PEnv, f: &Formula) -> Result<Tri, EvalError> {
        Ok(match &f.kind {
            FormulaKind::Compare(op, a, b) => {
                let a = self.expr(env, a)?;
                let b = self.expr(env, b)?;
                let subset = |x: &Bounds, y: &Bounds| {
                    if x.hi.is_subset(&y.lo) {
                        Tri::True
                    } else if !x.lo.is_subset(&y.hi) {
                        Tri::False
                    } else {
                        Tri::Unknown
                    }
                };
                match op {
                    CompareOp::In => subset(&a, &b),
                    CompareOp::NotIn => subset(&a, &b).not(),
                    CompareOp::Eq => subset(&a, &b).and(subset(&b, &a)),
                    CompareOp::NotEq => subset(&a, &b).and(subset(&b, &a)).not(),
                }
            }
            FormulaKind::Mult(m, e) => {
                let b = self.expr(env, e)?;
                let (lo, hi) = (b.lo.len(), b.hi.len());
                match m {
                    MultTest::No => {
                        if hi == 0 {
                            Tri::True
                        } else if lo > 0 {
                            Tri::False
                        } else {
                            Tri::Unknown
                        }
                    }
                    MultTest::Some => {
                        if lo > 0 {
                            Tri::True
                        } else if hi == 0 {
                            Tri::False
                        } else {
                            Tri::Unknown
                        }
                    }
                    MultTest::Lone => {
                        if hi <= 1 {
                            Tri::True
                        } else if lo >= 2 {
                            Tri::False
                        } else {
                            Tri::Unknown
                        }
                    }
                    MultTest::One => {
                        if lo == 1 && hi == 1 {
                            Tri::True
                        } else if lo >= 2 || hi == 0 {
                            Tri::False
                        } else {
                            Tri::Unknown
                        }
                    }
                }
            }
            FormulaKind::Not(g) => self.formula(env, g)?.not(),
            FormulaKind::Binary(op, a, b) => {
                let a = self.formula(env, a)?;
                match (op, a) {
                    (Logic::And, Tri::False) => Tri::False,
                    (Logic::Or, Tri::True) => Tri::True,
                    (Logic::Implies, Tri::False) => Tri::True,
                    _ => {
                        let b = self.formula(env, b)?;
                        match op {
                            Logic::And => a.and(b),
                            Logic::Or => a.or(b),
                            Logic::Implies => a.not().or(b),
                            Logic::Iff => match (a, b) {
                                (Tri::Unknown, _) | (_, Tri::Unknown) => Tri::Unknown,
                                _ => Tri::from_bool(a == b),
                            },
                        }
                    }
                }
            }
            FormulaKind::IfElse(c, a, b) => match self.formula(env, c)? {
                Tri::True => self.formula(env, a)?,
                Tri::False => self.formula(env, b)?,
                Tri::Unknown => {
                    let a = self.formula(env, a)?;
                    let b = self.formula(env, b)?;
                    if a == b {
                        a
                    } else {
                        Tri::Unknown
                    }
                }
            },
            FormulaKind::Block(fs) => {
                let mut acc = Tri::True;
                for g in fs {
                    acc = acc.and(self.formula(env, g)?);
                    if acc == Tri::False {
                        break;
                    }
                }
                acc
            }
            FormulaKind::Quant { quant, decls, body } => {
                // definite: bindings surely present and satisfying;
                // possible: bindings not surely absent or failing.
                let mut definite = 0usize;
                let mut possible = 0usize;
                let enough = match quant {
                    Quantifier::Some | Quantifier::No => 1,
                    _ => 2,
                };
                let base = env.len();
                let mut all_result = Tri::True;
                self.bindings(env, decls, 0, Tri::True, &mut Vec::new(), &mut |env, member| {
                    match quant {
                        Quantifier::All => {
                            // member implies body
                            let b = self.formula(env, body)?;
                            let v = member.not().or(b);
                            all_result = all_result.and(v);
                            Ok(all_result != Tri::False)
                        }
                        _ => {
                            let v = member.and(self.formula(env, body)?);
                            match v {
                                Tri::True => {
                                    definite += 1;
                                    possible += 1;
                                }
                                Tri::Unknown => possible += 1,
                                Tri::False => {}
                            }
                            Ok(definite < enough)
                        }
                    }
                })?;
                env.truncate(base);
                match quant {
                    Quantifier::All => all_result,
                    Quantifier::Some | Quantifier::No => {
                        let some = if definite > 0 {
                            Tri::True
                        } else if possible == 0 {
                            Tri::False
                        } else {
                            Tri::Unknown
                        };
                        if *quant == Quantifier::No {
                            some.not()
                        } else {
                            some
                        }
                    }
                    Quantifier::Lone => {
                        if definite >= 2 {
                            Tri::False
                        } else if possible <= 1 {
                            Tri::True
                        } else {
                            Tri::Unknown
                        }
                    }
                    Quantifier::One => {
                        if definite >= 2 || possible == 0 {
                            Tri::False
                        } else if definite == 1 && possible == 1 {
                            Tri::True
                        } else {
                            Tri::Unknown
                        }
                    }
                }
            }
            FormulaKind::Call(n, args) => {
                let p = self.model.pred(n).ok_or_else(|| EvalError::UnknownCall(n.clone()))?;
                let mut inner = PEnv::new();
                for (param, a) in p.params.iter().zip(args) {
                    inner.push((param.name.clone(), self.expr(env, a)?));
                }
                self.formula(&mut inner, &p.body)?
            }
        })
    }

    /// Visit every candidate binding with its membership status.
    fn bindings(
        &self,
        env: &mut PEnv,
        decls: &[Decl],
        i: usize,
        member: Tri,
        chosen: &mut Vec<AtomId>,
        visit: &mut dyn FnMut(&mut PEnv, Tri) -> Result<bool, EvalError>,
    ) -> Result<bool, EvalError> {
        let Some(d) = decls.get(i) else {
            return visit(env, member);
        };
        let bound = self.expr(env, &d.bound)?;
        let cands: Vec<(AtomId, Tri)> = bound
            .hi
            .atoms()
            .map(|a| (a, if bound.lo.contains(&[a]) { Tri::True } else { Tri::Unknown }))
            .collect();
        self.bind_names(env, decls, i, d, &cands, 0, member, chosen, visit)
    }

    #[allow(clippy::too_many_arguments)]
    fn bind_names(
        &self,
        env: &mut PEnv,
        decls: &[Decl],
        i: usize,
        d: &Decl,
        cands: &[(AtomId, Tri)],
        k: usize,
        member: Tri,
        chosen: &mut Vec<AtomId>,
        visit: &mut dyn FnMut(&mut PEnv, Tri) -> Result<bool, EvalError>,
    ) -> Result<bool, EvalError> {
        if k == d.names.len() {
            return self.bindings(env, decls, i + 1, member, &mut Vec::new(), visit);
        }
        let base = env.len();
        for &(a, m) in cands {
            if d.disj && chosen.contains(&a) {
                continue;
            }
            env.truncate(base);
            env.push((d.names[k].clone(), Bounds::exact(RelationValue::singleton(a))));
            chosen.push(a);
            let go_on = self.bind_names(env, decls, i, d, cands, k + 1, member.and(m), chosen, visit)?;
            chosen.pop();
            if !go_on {
                env.truncate(base);
                return Ok(false);
            }
        }
        env.truncate(base);
        Ok(true)
    }
}
