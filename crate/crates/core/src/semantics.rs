//! Finite relational instances and their evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::*;

pub type AtomId = u32;
pub type Tuple = Vec<AtomId>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub id: AtomId,
    /// Top-level signature the atom belongs to.
    pub sig: Ident,
    pub name: String,
}

/// A set of tuples of uniform arity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationValue {
    pub arity: usize,
    pub tuples: BTreeSet<Tuple>,
}

impl RelationValue {
    pub fn empty(arity: usize) -> RelationValue {
        RelationValue { arity, tuples: BTreeSet::new() }
    }

    pub fn from_tuples(arity: usize, tuples: impl IntoIterator<Item = Tuple>) -> RelationValue {
        let tuples: BTreeSet<Tuple> = tuples.into_iter().collect();
        debug_assert!(tuples.iter().all(|t| t.len() == arity));
        RelationValue { arity, tuples }
    }

    pub fn set(atoms: impl IntoIterator<Item = AtomId>) -> RelationValue {
        RelationValue::from_tuples(1, atoms.into_iter().map(|a| vec![a]))
    }

    pub fn singleton(a: AtomId) -> RelationValue {
        RelationValue::set([a])
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &[AtomId]) -> bool {
        self.tuples.contains(t)
    }

    /// Atoms of a unary relation.
    pub fn atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.tuples.iter().map(|t| t[0])
    }

    pub fn is_subset(&self, other: &RelationValue) -> bool {
        self.tuples.is_subset(&other.tuples)
    }

    pub fn union(&self, other: &RelationValue) -> RelationValue {
        RelationValue { arity: self.arity, tuples: self.tuples.union(&other.tuples).cloned().collect() }
    }

    pub fn difference(&self, other: &RelationValue) -> RelationValue {
        RelationValue {
            arity: self.arity,
            tuples: self.tuples.difference(&other.tuples).cloned().collect(),
        }
    }

    pub fn intersection(&self, other: &RelationValue) -> RelationValue {
        RelationValue {
            arity: self.arity,
            tuples: self.tuples.intersection(&other.tuples).cloned().collect(),
        }
    }

    pub fn product(&self, other: &RelationValue) -> RelationValue {
        let mut tuples = BTreeSet::new();
        for a in &self.tuples {
            for b in &other.tuples {
                let mut t = a.clone();
                t.extend_from_slice(b);
                tuples.insert(t);
            }
        }
        RelationValue { arity: self.arity + other.arity, tuples }
    }

    pub fn join(&self, other: &RelationValue) -> RelationValue {
        let arity = self.arity + other.arity - 2;
        let mut by_first: BTreeMap<AtomId, Vec<&Tuple>> = BTreeMap::new();
        for b in &other.tuples {
            by_first.entry(b[0]).or_default().push(b);
        }
        let mut tuples = BTreeSet::new();
        for a in &self.tuples {
            if let Some(bs) = by_first.get(a.last().unwrap()) {
                for b in bs {
                    let mut t = a[..a.len() - 1].to_vec();
                    t.extend_from_slice(&b[1..]);
                    tuples.insert(t);
                }
            }
        }
        RelationValue { arity, tuples }
    }

    /// `self <: other`, with `self` unary.
    pub fn domain_restrict(&self, other: &RelationValue) -> RelationValue {
        RelationValue {
            arity: other.arity,
            tuples: other.tuples.iter().filter(|t| self.tuples.contains(&t[..1])).cloned().collect(),
        }
    }

    /// `self :> other`, with `other` unary.
    pub fn range_restrict(&self, other: &RelationValue) -> RelationValue {
        RelationValue {
            arity: self.arity,
            tuples: self
                .tuples
                .iter()
                .filter(|t| other.tuples.contains(&t[t.len() - 1..]))
                .cloned()
                .collect(),
        }
    }

    pub fn transpose(&self) -> RelationValue {
        RelationValue {
            arity: 2,
            tuples: self.tuples.iter().map(|t| vec![t[1], t[0]]).collect(),
        }
    }

    /// Transitive closure by iterated squaring.
    pub fn closure(&self) -> RelationValue {
        let mut r = self.clone();
        loop {
            let next = r.union(&r.join(&r));
            if next.len() == r.len() {
                return r;
            }
            r = next;
        }
    }
}

/// A complete valuation of a model's signatures, fields and orderings.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Instance {
    pub universe: Vec<Atom>,
    pub sigs: BTreeMap<Ident, RelationValue>,
    /// Keyed by (owner, field name).
    pub fields: BTreeMap<(Ident, Ident), RelationValue>,
    /// Successor relation of each ordered signature.
    pub next: BTreeMap<Ident, RelationValue>,
}

impl Instance {
    pub fn atom(&self, id: AtomId) -> Option<&Atom> {
        self.universe.iter().find(|a| a.id == id)
    }

    pub fn atom_named(&self, name: &str) -> Option<&Atom> {
        self.universe.iter().find(|a| a.name == name)
    }

    pub fn sig(&self, name: &str) -> RelationValue {
        self.sigs.get(name).cloned().unwrap_or_else(|| RelationValue::empty(1))
    }

    pub fn field(&self, owner: &str, name: &str) -> Option<&RelationValue> {
        self.fields.get(&(owner.to_string(), name.to_string()))
    }

    fn atom_name(&self, id: AtomId) -> String {
        self.atom(id).map(|a| a.name.clone()).unwrap_or_else(|| format!("?{id}"))
    }

    fn format_value(&self, v: &RelationValue) -> String {
        if v.is_empty() {
            return vec!["none"; v.arity].join("->");
        }
        v.tuples
            .iter()
            .map(|t| t.iter().map(|&a| self.atom_name(a)).collect::<Vec<_>>().join("->"))
            .collect::<Vec<_>>()
            .join(" + ")
    }

    pub fn to_json(&self) -> InstanceJson {
        let names = |v: &RelationValue| -> Vec<Vec<String>> {
            v.tuples.iter().map(|t| t.iter().map(|&a| self.atom_name(a)).collect()).collect()
        };
        InstanceJson {
            universe: self
                .universe
                .iter()
                .map(|a| JsonAtom { name: a.name.clone(), sig: a.sig.clone() })
                .collect(),
            sigs: self
                .sigs
                .iter()
                .map(|(s, v)| (s.clone(), v.atoms().map(|a| self.atom_name(a)).collect()))
                .collect(),
            fields: self.fields.iter().map(|((o, f), v)| (format!("{o}.{f}"), names(v))).collect(),
            next: self.next.iter().map(|(s, v)| (s.clone(), names(v))).collect(),
        }
    }

    pub fn from_json(doc: &InstanceJson) -> Result<Instance, String> {
        let mut ids = BTreeMap::new();
        let mut universe = Vec::new();
        for (i, a) in doc.universe.iter().enumerate() {
            if ids.insert(a.name.clone(), i as AtomId).is_some() {
                return Err(format!("atom `{}` listed twice", a.name));
            }
            universe.push(Atom { id: i as AtomId, sig: a.sig.clone(), name: a.name.clone() });
        }
        let id = |n: &String| ids.get(n).copied().ok_or_else(|| format!("unknown atom `{n}`"));
        let rel = |rows: &Vec<Vec<String>>, arity: usize| -> Result<RelationValue, String> {
            let mut tuples = BTreeSet::new();
            for r in rows {
                if r.len() != arity {
                    return Err(format!("tuple of length {} where {arity} expected", r.len()));
                }
                tuples.insert(r.iter().map(id).collect::<Result<Tuple, _>>()?);
            }
            Ok(RelationValue { arity, tuples })
        };
        let mut inst = Instance { universe, ..Instance::default() };
        for (s, atoms) in &doc.sigs {
            let v = RelationValue::set(atoms.iter().map(id).collect::<Result<Vec<_>, _>>()?);
            inst.sigs.insert(s.clone(), v);
        }
        for (k, rows) in &doc.fields {
            let (o, f) = k.split_once('.').ok_or_else(|| format!("field key `{k}` is not Owner.name"))?;
            let arity = rows.first().map_or(2, |r| r.len()).max(2);
            inst.fields.insert((o.to_string(), f.to_string()), rel(rows, arity)?);
        }
        for (s, rows) in &doc.next {
            inst.next.insert(s.clone(), rel(rows, 2)?);
        }
        Ok(inst)
    }

    /// Fix up arities of empty fields after JSON loading, which cannot
    /// recover the arity of an empty tuple list.
    pub fn with_model_arities(mut self, model: &Model) -> Instance {
        for f in model.fields() {
            let key = (f.owner.clone(), f.name.clone());
            let v = self.fields.entry(key).or_insert_with(|| RelationValue::empty(f.arity()));
            if v.is_empty() {
                v.arity = f.arity();
            }
        }
        self
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (s, v) in &self.sigs {
            writeln!(f, "{s} = {}", self.format_value(v))?;
        }
        for ((o, n), v) in &self.fields {
            writeln!(f, "{o} <: {n} = {}", self.format_value(v))?;
        }
        for (s, v) in &self.next {
            writeln!(f, "{s} <: next = {}", self.format_value(v))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonAtom {
    pub name: String,
    pub sig: String,
}

/// Serialized form of an [`Instance`]; atoms are referred to by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub universe: Vec<JsonAtom>,
    pub sigs: BTreeMap<String, Vec<String>>,
    pub fields: BTreeMap<String, Vec<Vec<String>>>,
    #[serde(default)]
    pub next: BTreeMap<String, Vec<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("cannot evaluate unresolved name `{0}`")]
    Unresolved(String),
    #[error("instance has no value for `{0}`")]
    Missing(String),
    #[error("unknown predicate or function `{0}`")]
    UnknownCall(String),
}

/// Variable bindings, innermost last.
#[derive(Debug, Clone, Default)]
pub struct Env {
    vars: Vec<(Ident, RelationValue)>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn bind(&mut self, name: impl Into<Ident>, v: RelationValue) {
        self.vars.push((name.into(), v));
    }

    pub fn bind_atom(&mut self, name: impl Into<Ident>, a: AtomId) {
        self.bind(name, RelationValue::singleton(a));
    }

    pub fn get(&self, name: &str) -> Option<&RelationValue> {
        self.vars.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn truncate(&mut self, n: usize) {
        self.vars.truncate(n);
    }

    fn len(&self) -> usize {
        self.vars.len()
    }
}

/// Exact two-valued evaluator over one instance.
pub struct Evaluator<'a> {
    model: &'a Model,
    inst: &'a Instance,
    univ: RelationValue,
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a Model, inst: &'a Instance) -> Evaluator<'a> {
        let mut univ = RelationValue::empty(1);
        for s in model.top_level() {
            univ = univ.union(&inst.sig(&s.name));
        }
        Evaluator { model, inst, univ }
    }

    pub fn expr(&self, env: &mut Env, e: &Expr) -> Result<RelationValue, EvalError> {
        Ok(match e {
            Expr::Name(n) => {
                if let Some(v) = env.get(n) {
                    return Ok(v.clone());
                }
                if self.model.sig(n).is_some() {
                    return self.expr(env, &Expr::Sig(n.clone()));
                }
                let mut fields = self.model.fields_named(n);
                match (fields.next(), fields.next()) {
                    (Some(f), None) => self.field_value(&f.owner, &f.name)?,
                    _ => return Err(EvalError::Unresolved(n.clone())),
                }
            }
            Expr::Sig(s) => self.inst.sigs.get(s).cloned().ok_or_else(|| EvalError::Missing(s.clone()))?,
            Expr::Field { owner, name } => self.field_value(owner, name)?,
            Expr::Var(v) => env.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone()))?,
            Expr::Next(s) => self.next_of(s),
            Expr::First(s) => {
                let next = self.next_of(s);
                self.inst.sig(s).difference(&RelationValue::set(next.tuples.iter().map(|t| t[1])))
            }
            Expr::Last(s) => {
                let next = self.next_of(s);
                self.inst.sig(s).difference(&RelationValue::set(next.tuples.iter().map(|t| t[0])))
            }
            Expr::None => RelationValue::empty(1),
            Expr::Univ => self.univ.clone(),
            Expr::Iden => RelationValue::from_tuples(2, self.univ.atoms().map(|a| vec![a, a])),
            Expr::Unary(op, a) => {
                let v = self.expr(env, a)?;
                match op {
                    UnaryOp::Transpose => v.transpose(),
                    UnaryOp::Closure => v.closure(),
                    UnaryOp::ReflexiveClosure => v
                        .closure()
                        .union(&RelationValue::from_tuples(2, self.univ.atoms().map(|a| vec![a, a]))),
                }
            }
            Expr::Binary(op, a, b) => {
                let a = self.expr(env, a)?;
                let b = self.expr(env, b)?;
                match op {
                    BinaryOp::Union => a.union(&b),
                    BinaryOp::Difference => a.difference(&b),
                    BinaryOp::Intersection => a.intersection(&b),
                    BinaryOp::Product => a.product(&b),
                    BinaryOp::Join => a.join(&b),
                    BinaryOp::DomainRestrict => a.domain_restrict(&b),
                    BinaryOp::RangeRestrict => a.range_restrict(&b),
                }
            }
            Expr::BoxJoin(t, args) => {
                if let Expr::Name(n) = &**t {
                    if env.get(n).is_none() && self.model.fun(n).is_some() {
                        return self.expr(env, &Expr::Call(n.clone(), args.clone()));
                    }
                }
                let mut acc = self.expr(env, t)?;
                for a in args {
                    acc = self.expr(env, a)?.join(&acc);
                }
                acc
            }
            Expr::Call(n, args) => {
                let f = self.model.fun(n).ok_or_else(|| EvalError::UnknownCall(n.clone()))?;
                let mut inner = Env::new();
                for (p, a) in f.params.iter().zip(args) {
                    inner.bind(p.name.clone(), self.expr(env, a)?);
                }
                self.expr(&mut inner, &f.body)?
            }
        })
    }

    fn field_value(&self, owner: &str, name: &str) -> Result<RelationValue, EvalError> {
        self.inst
            .field(owner, name)
            .cloned()
            .ok_or_else(|| EvalError::Missing(format!("{owner}.{name}")))
    }

    fn next_of(&self, s: &str) -> RelationValue {
        self.inst.next.get(s).cloned().unwrap_or_else(|| RelationValue::empty(2))
    }

    pub fn formula(&self, env: &mut Env, f: &Formula) -> Result<bool, EvalError> {
        Ok(match &f.kind {
            FormulaKind::Compare(op, a, b) => {
                let a = self.expr(env, a)?;
                let b = self.expr(env, b)?;
                match op {
                    CompareOp::In => a.is_subset(&b),
                    CompareOp::NotIn => !a.is_subset(&b),
                    CompareOp::Eq => a.tuples == b.tuples,
                    CompareOp::NotEq => a.tuples != b.tuples,
                }
            }
            FormulaKind::Mult(m, e) => {
                let n = self.expr(env, e)?.len();
                match m {
                    MultTest::No => n == 0,
                    MultTest::Some => n > 0,
                    MultTest::Lone => n <= 1,
                    MultTest::One => n == 1,
                }
            }
            FormulaKind::Not(g) => !self.formula(env, g)?,
            FormulaKind::Binary(op, a, b) => {
                let a = self.formula(env, a)?;
                match op {
                    Logic::And => a && self.formula(env, b)?,
                    Logic::Or => a || self.formula(env, b)?,
                    Logic::Implies => !a || self.formula(env, b)?,
                    Logic::Iff => a == self.formula(env, b)?,
                }
            }
            FormulaKind::IfElse(c, a, b) => {
                if self.formula(env, c)? {
                    self.formula(env, a)?
                } else {
                    self.formula(env, b)?
                }
            }
            FormulaKind::Block(fs) => {
                for g in fs {
                    if !self.formula(env, g)? {
                        return Ok(false);
                    }
                }
                true
            }
            FormulaKind::Quant { quant, decls, body } => {
                // Count satisfying bindings, stopping once the answer is known.
                let stop_at = match quant {
                    Quantifier::All | Quantifier::Some | Quantifier::No => 1,
                    Quantifier::Lone | Quantifier::One => 2,
                };
                let target = !matches!(quant, Quantifier::All);
                let mut count = 0;
                let base = env.len();
                self.bindings(env, decls, 0, &mut Vec::new(), &mut |env| {
                    if self.formula(env, body)? == target {
                        count += 1;
                    }
                    Ok(count < stop_at)
                })?;
                env.truncate(base);
                match quant {
                    Quantifier::All | Quantifier::No => count == 0,
                    Quantifier::Some => count > 0,
                    Quantifier::Lone => count <= 1,
                    Quantifier::One => count == 1,
                }
            }
            FormulaKind::Call(n, args) => {
                let p = self.model.pred(n).ok_or_else(|| EvalError::UnknownCall(n.clone()))?;
                let mut inner = Env::new();
                for (param, a) in p.params.iter().zip(args) {
                    inner.bind(param.name.clone(), self.expr(env, a)?);
                }
                self.formula(&mut inner, &p.body)?
            }
        })
    }

    /// Visit every binding of `decls[i..]`; `visit` returns false to stop.
    /// Returns false if stopped early.
    fn bindings(
        &self,
        env: &mut Env,
        decls: &[Decl],
        i: usize,
        chosen: &mut Vec<AtomId>,
        visit: &mut dyn FnMut(&mut Env) -> Result<bool, EvalError>,
    ) -> Result<bool, EvalError> {
        let Some(d) = decls.get(i) else {
            return visit(env);
        };
        let bound: Vec<AtomId> = self.expr(env, &d.bound)?.atoms().collect();
        let base = env.len();
        let r = self.bind_names(env, d, &bound, 0, chosen, &mut |env| self.bindings(env, decls, i + 1, &mut Vec::new(), visit));
        env.truncate(base);
        r
    }

    fn bind_names(
        &self,
        env: &mut Env,
        d: &Decl,
        bound: &[AtomId],
        k: usize,
        chosen: &mut Vec<AtomId>,
        rest: &mut dyn FnMut(&mut Env) -> Result<bool, EvalError>,
    ) -> Result<bool, EvalError> {
        if k == d.names.len() {
            return rest(env);
        }
        let base = env.len();
        for &a in bound {
            if d.disj && chosen.contains(&a) {
                continue;
            }
            env.truncate(base);
            env.bind_atom(d.names[k].clone(), a);
            chosen.push(a);
            let go_on = self.bind_names(env, d, bound, k + 1, chosen, rest)?;
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

pub fn eval_expr(model: &Model, inst: &Instance, env: &Env, e: &Expr) -> Result<RelationValue, EvalError> {
    Evaluator::new(model, inst).expr(&mut env.clone(), e)
}

pub fn eval_formula(model: &Model, inst: &Instance, env: &Env, f: &Formula) -> Result<bool, EvalError> {
    Evaluator::new(model, inst).formula(&mut env.clone(), f)
}

/// Whether every fact of the model and every extra formula holds.
pub fn satisfies_all(model: &Model, inst: &Instance, extra: &[&Formula]) -> Result<bool, EvalError> {
    let ev = Evaluator::new(model, inst);
    let mut env = Env::new();
    for f in model.facts.iter().map(|f| &f.body).chain(extra.iter().copied()) {
        if !ev.formula(&mut env, f)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Check the declaration semantics of `model` on `inst`.
pub fn check_structure(model: &Model, inst: &Instance) -> Result<(), Vec<String>> {
    let mut v = Vec::new();
    let mut ids = BTreeSet::new();
    for a in &inst.universe {
        if !ids.insert(a.id) {
            v.push(format!("atom id {} used twice", a.id));
        }
    }
    let universe = RelationValue::set(ids.iter().copied());
    let name = |a: AtomId| inst.atom_name(a);

    for s in &model.sigs {
        let Some(val) = inst.sigs.get(&s.name) else {
            v.push(format!("signature {} has no value", s.name));
            continue;
        };
        if val.arity != 1 {
            v.push(format!("signature {} is not a set", s.name));
            continue;
        }
        if !val.is_subset(&universe) {
            v.push(format!("signature {} contains atoms outside the universe", s.name));
        }
        match &s.kind {
            SigKind::TopLevel => {
                for a in val.atoms() {
                    if inst.atom(a).is_some_and(|atom| atom.sig != s.name) {
                        v.push(format!("atom {} of {} is typed {}", name(a), s.name, inst.atom(a).unwrap().sig));
                    }
                }
            }
            SigKind::Subset(p) => {
                if !val.is_subset(&inst.sig(p)) {
                    v.push(format!("{}: subset not contained in parent {p}", s.name));
                }
            }
            SigKind::Extension(p) => {
                if !val.is_subset(&inst.sig(p)) {
                    v.push(format!("{}: extension not contained in parent {p}", s.name));
                }
            }
        }
        let n = val.len();
        match s.multiplicity {
            Some(SigMult::One) if n != 1 => v.push(format!("one sig {} has {n} atoms", s.name)),
            Some(SigMult::Lone) if n > 1 => v.push(format!("lone sig {} has {n} atoms", s.name)),
            Some(SigMult::Some) if n == 0 => v.push(format!("some sig {} is empty", s.name)),
            _ => {}
        }
        let exts: Vec<&SigDecl> = model.extensions(&s.name).collect();
        for (i, a) in exts.iter().enumerate() {
            for b in &exts[i + 1..] {
                if !inst.sig(&a.name).intersection(&inst.sig(&b.name)).is_empty() {
                    v.push(format!("extensions {} and {} of {} overlap", a.name, b.name, s.name));
                }
            }
        }
        if s.is_abstract {
            let mut union = RelationValue::empty(1);
            for e in &exts {
                union = union.union(&inst.sig(&e.name));
            }
            if union.tuples != val.tuples {
                v.push(format!("abstract {} is not the union of its extensions", s.name));
            }
        }
    }

    // Top-level signatures partition the universe.
    let mut seen = BTreeMap::new();
    for s in model.top_level() {
        for a in inst.sig(&s.name).atoms() {
            if let Some(other) = seen.insert(a, &s.name) {
                v.push(format!("atom {} belongs to both {other} and {}", name(a), s.name));
            }
        }
    }
    for a in &inst.universe {
        if !seen.contains_key(&a.id) {
            v.push(format!("atom {} belongs to no top-level signature", a.name));
        }
    }

    for f in model.fields() {
        let Some(val) = inst.field(&f.owner, &f.name) else {
            v.push(format!("field {}.{} has no value", f.owner, f.name));
            continue;
        };
        if val.arity != f.arity() {
            v.push(format!("field {}.{} has arity {} instead of {}", f.owner, f.name, val.arity, f.arity()));
            continue;
        }
        let cols: Vec<RelationValue> =
            std::iter::once(&f.owner).chain(&f.columns).map(|c| inst.sig(c)).collect();
        for t in &val.tuples {
            if t.iter().zip(&cols).any(|(a, c)| !c.contains(&[*a])) {
                let shown = t.iter().map(|&a| name(a)).collect::<Vec<_>>().join("->");
                v.push(format!("tuple {shown} of {}.{} is outside its declared columns", f.owner, f.name));
            }
        }
        if f.multiplicity == Multiplicity::Set {
            continue;
        }
        // Every prefix over the declared columns, not just those in use.
        let mut prefixes: Vec<Tuple> = vec![Vec::new()];
        for c in &cols[..cols.len() - 1] {
            prefixes = prefixes
                .into_iter()
                .flat_map(|p| {
                    c.atoms().map(move |a| {
                        let mut p = p.clone();
                        p.push(a);
                        p
                    })
                })
                .collect();
        }
        let mut counts: BTreeMap<&[AtomId], usize> = BTreeMap::new();
        for t in &val.tuples {
            *counts.entry(&t[..t.len() - 1]).or_default() += 1;
        }
        for p in &prefixes {
            let n = counts.get(p.as_slice()).copied().unwrap_or(0);
            let bad = match f.multiplicity {
                Multiplicity::Lone => n > 1,
                Multiplicity::One => n != 1,
                Multiplicity::Some => n == 0,
                Multiplicity::Set => false,
            };
            if bad {
                let shown = p.iter().map(|&a| name(a)).collect::<Vec<_>>().join("->");
                let kw = match f.multiplicity {
                    Multiplicity::Lone => "lone",
                    Multiplicity::One => "one",
                    _ => "some",
                };
                v.push(format!("{}.{}: {shown} has {n} images, violating `{kw}`", f.owner, f.name));
            }
        }
    }

    for s in &model.orderings {
        let atoms: BTreeSet<AtomId> = inst.sig(s).atoms().collect();
        let next = inst.next.get(s).cloned().unwrap_or_else(|| RelationValue::empty(2));
        if let Err(msg) = check_linear(&atoms, &next) {
            v.push(format!("{s}: {msg}"));
        }
    }
    for s in inst.next.keys() {
        if !model.is_ordered(s) {
            v.push(format!("{s} has a successor relation but is not ordered"));
        }
    }

    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

fn check_linear(atoms: &BTreeSet<AtomId>, next: &RelationValue) -> Result<(), String> {
    if next.arity != 2 {
        return Err("successor relation is not binary".into());
    }
    let mut succ = BTreeMap::new();
    let mut pred = BTreeMap::new();
    for t in &next.tuples {
        if !atoms.contains(&t[0]) || !atoms.contains(&t[1]) {
            return Err("ordering relates atoms outside the signature".into());
        }
        if succ.insert(t[0], t[1]).is_some() || pred.insert(t[1], t[0]).is_some() {
            return Err("ordering is not linear".into());
        }
    }
    if atoms.is_empty() {
        return Ok(());
    }
    let firsts: Vec<AtomId> = atoms.iter().copied().filter(|a| !pred.contains_key(a)).collect();
    if firsts.len() != 1 {
        return Err("ordering does not cover signature".into());
    }
    let mut visited = BTreeSet::new();
    let mut cur = firsts[0];
    loop {
        if !visited.insert(cur) {
            return Err("ordering is cyclic".into());
        }
        match succ.get(&cur) {
            Some(&n) => cur = n,
            None => break,
        }
    }
    if visited.len() != atoms.len() {
        return Err("ordering does not cover signature".into());
    }
    Ok(())
}

/// Check the scope of each top-level signature.
pub fn check_scopes(model: &Model, inst: &Instance, cmd: &RunCommand) -> Result<(), Vec<String>> {
    let mut v = Vec::new();
    for s in model.top_level() {
        let scope = cmd.scope_of(&s.name);
        let n = inst.sig(&s.name).len();
        let exact = scope.exact || model.is_ordered(&s.name);
        if n > scope.bound as usize || (exact && n != scope.bound as usize) {
            let kind = if exact { "exactly" } else { "at most" };
            v.push(format!("{} has {n} atoms, scope allows {kind} {}", s.name, scope.bound));
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Whether two instances are equal up to renaming atoms within each
/// top-level signature. Exponential; intended for small instances.
pub fn isomorphic(model: &Model, a: &Instance, b: &Instance) -> bool {
    // (atom of a, candidate images in b), grouped by top-level signature
    let mut slots: Vec<(AtomId, Vec<AtomId>)> = Vec::new();
    for t in model.top_level() {
        let from: Vec<AtomId> = a.sig(&t.name).atoms().collect();
        let to: Vec<AtomId> = b.sig(&t.name).atoms().collect();
        if from.len() != to.len() {
            return false;
        }
        slots.extend(from.into_iter().map(|x| (x, to.clone())));
    }
    iso_search(a, b, &slots, &mut BTreeMap::new(), &mut BTreeSet::new())
}

fn iso_search(
    a: &Instance,
    b: &Instance,
    slots: &[(AtomId, Vec<AtomId>)],
    mapping: &mut BTreeMap<AtomId, AtomId>,
    taken: &mut BTreeSet<AtomId>,
) -> bool {
    let Some(((from, to), rest)) = slots.split_first() else {
        return same_under(a, b, mapping);
    };
    for &target in to {
        if !taken.insert(target) {
            continue;
        }
        mapping.insert(*from, target);
        if iso_search(a, b, rest, mapping, taken) {
            return true;
        }
        mapping.remove(from);
        taken.remove(&target);
    }
    false
}

fn same_under(a: &Instance, b: &Instance, m: &BTreeMap<AtomId, AtomId>) -> bool {
    let map = |v: &RelationValue| -> BTreeSet<Tuple> {
        v.tuples.iter().map(|t| t.iter().map(|x| m.get(x).copied().unwrap_or(u32::MAX)).collect()).collect()
    };
    a.sigs.len() == b.sigs.len()
        && a.sigs.iter().all(|(k, v)| b.sigs.get(k).is_some_and(|w| map(v) == w.tuples))
        && a.fields.len() == b.fields.len()
        && a.fields.iter().all(|(k, v)| b.fields.get(k).is_some_and(|w| map(v) == w.tuples))
        && a.next.iter().all(|(k, v)| map(v) == b.next.get(k).map(|w| w.tuples.clone()).unwrap_or_default())
        && b.next.iter().all(|(k, w)| a.next.get(k).map(&map).unwrap_or_default() == w.tuples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn join_matches_last_and_first_columns() {
        let r = RelationValue::from_tuples(2, [vec![0, 1], vec![1, 2]]);
        let s = RelationValue::singleton(0);
        assert_eq!(s.join(&r), RelationValue::singleton(1));
        assert_eq!(r.join(&r), RelationValue::from_tuples(2, [vec![0, 2]]));
        assert_eq!(RelationValue::empty(1).join(&r), RelationValue::empty(1));
    }

    #[test]
    fn closure_of_chain() {
        let r = RelationValue::from_tuples(2, [vec![0, 1], vec![1, 2], vec![2, 3]]);
        let c = r.closure();
        assert_eq!(c.len(), 6);
        assert!(c.contains(&[0, 3]));
    }

    #[test]
    fn linear_order_checks() {
        let atoms: BTreeSet<AtomId> = [0, 1, 2].into();
        let ok = RelationValue::from_tuples(2, [vec![0, 1], vec![1, 2]]);
        assert!(check_linear(&atoms, &ok).is_ok());
        let gap = RelationValue::from_tuples(2, [vec![0, 1]]);
        assert_eq!(check_linear(&atoms, &gap).unwrap_err(), "ordering does not cover signature");
        let branch = RelationValue::from_tuples(2, [vec![0, 1], vec![0, 2]]);
        assert!(check_linear(&atoms, &branch).is_err());
        assert!(check_linear(&BTreeSet::new(), &RelationValue::empty(2)).is_ok());
    }
}
