//! Exhaustive enumeration of the instances of a model within given scopes.
//!
//! Deliberately simple: every candidate valuation is generated and then
//! filtered with the exact evaluator. Useful as a reference for the solver
//! and for counting instances of small models.

use std::collections::BTreeMap;

use crate::ast::*;
use crate::semantics::{check_structure, satisfies_all, Atom, AtomId, EvalError, Instance, RelationValue, Tuple};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub struct EnumerateOptions {
    /// Stop after visiting this many instances.
    pub limit: Option<u64>,
    /// Only use atom prefixes `S$0 .. S$k-1` of each top-level signature and
    /// only the canonical order of each ordered signature.
    pub symmetry_breaking: bool,
}


#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationEnd {
    Exhausted,
    /// At least one more instance exists beyond the limit.
    LimitReached,
}

struct Enumerator<'a, F> {
    model: &'a Model,
    facts: &'a [Formula],
    opts: EnumerateOptions,
    visit: F,
    seen: u64,
    order: Vec<&'a SigDecl>,
}

enum Step {
    Go,
    Stop,
}

fn subsets<T: Clone>(items: &[T]) -> impl Iterator<Item = Vec<T>> + '_ {
    assert!(items.len() < 64, "too many candidate tuples to enumerate");
    (0u64..1 << items.len())
        .map(move |mask| items.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, t)| t.clone()).collect())
}

fn permutations(items: &[AtomId]) -> Vec<Vec<AtomId>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

impl<'a, F: FnMut(&Instance)> Enumerator<'a, F> {
    /// Choose the atoms of top-level signature `i` onwards.
    fn tops(&mut self, tops: &[&SigDecl], scopes: &BTreeMap<Ident, Scope>, i: usize, inst: &mut Instance) -> Result<Step, EvalError> {
        let Some(s) = tops.get(i) else {
            return self.subsigs(0, inst);
        };
        let scope = scopes.get(&s.name).copied().unwrap_or(Scope { bound: DEFAULT_SCOPE, exact: false });
        let exact = scope.exact || self.model.is_ordered(&s.name);
        let base = inst.universe.len() as AtomId;
        let pool: Vec<Atom> = (0..scope.bound)
            .map(|j| Atom { id: base + j, sig: s.name.clone(), name: format!("{}${j}", s.name) })
            .collect();
        let choices: Vec<Vec<Atom>> = if self.opts.symmetry_breaking {
            let from = if exact { pool.len() } else { 0 };
            (from..=pool.len()).map(|k| pool[..k].to_vec()).collect()
        } else {
            subsets(&pool).filter(|c| !exact || c.len() == pool.len()).collect()
        };
        for atoms in choices {
            let len = inst.universe.len();
            inst.sigs.insert(s.name.clone(), RelationValue::set(atoms.iter().map(|a| a.id)));
            inst.universe.extend(atoms);
            let step = self.tops(tops, scopes, i + 1, inst)?;
            inst.universe.truncate(len);
            if let Step::Stop = step {
                return Ok(Step::Stop);
            }
        }
        inst.sigs.remove(&s.name);
        Ok(Step::Go)
    }

    fn subsigs(&mut self, i: usize, inst: &mut Instance) -> Result<Step, EvalError> {
        let Some(s) = self.order.get(i).copied() else {
            let fields: Vec<&FieldDecl> = self.model.fields().collect();
            return self.fields(&fields, 0, inst);
        };
        let Some(p) = s.parent() else {
            return self.subsigs(i + 1, inst);
        };
        let parent: Vec<AtomId> = inst.sig(p).atoms().collect();
        for atoms in subsets(&parent) {
            inst.sigs.insert(s.name.clone(), RelationValue::set(atoms));
            if let Step::Stop = self.subsigs(i + 1, inst)? {
                return Ok(Step::Stop);
            }
        }
        inst.sigs.remove(&s.name);
        Ok(Step::Go)
    }

    fn fields(&mut self, fields: &[&FieldDecl], i: usize, inst: &mut Instance) -> Result<Step, EvalError> {
        let Some(f) = fields.get(i) else {
            return self.orders(0, inst);
        };
        let product = f.columns.iter().fold(inst.sig(&f.owner), |acc, c| acc.product(&inst.sig(c)));
        let tuples: Vec<Tuple> = product.tuples.into_iter().collect();
        let key = (f.owner.clone(), f.name.clone());
        for ts in subsets(&tuples) {
            inst.fields.insert(key.clone(), RelationValue::from_tuples(f.arity(), ts));
            if let Step::Stop = self.fields(fields, i + 1, inst)? {
                return Ok(Step::Stop);
            }
        }
        inst.fields.remove(&key);
        Ok(Step::Go)
    }

    fn orders(&mut self, i: usize, inst: &mut Instance) -> Result<Step, EvalError> {
        let Some(o) = self.model.orderings.get(i) else {
            return self.leaf(inst);
        };
        let atoms: Vec<AtomId> = inst.sig(o).atoms().collect();
        let perms = if self.opts.symmetry_breaking { vec![atoms] } else { permutations(&atoms) };
        for p in perms {
            inst.next.insert(o.clone(), RelationValue::from_tuples(2, p.windows(2).map(|w| w.to_vec())));
            if let Step::Stop = self.orders(i + 1, inst)? {
                return Ok(Step::Stop);
            }
        }
        inst.next.remove(o);
        Ok(Step::Go)
    }

    fn leaf(&mut self, inst: &Instance) -> Result<Step, EvalError> {
        if check_structure(self.model, inst).is_err() {
            return Ok(Step::Go);
        }
        let facts: Vec<&Formula> = self.facts.iter().collect();
        if !satisfies_all(self.model, inst, &facts)? {
            return Ok(Step::Go);
        }
        if self.opts.limit.is_some_and(|l| self.seen >= l) {
            return Ok(Step::Stop);
        }
        self.seen += 1;
        (self.visit)(inst);
        Ok(Step::Go)
    }
}

/// Visit every instance of `model` satisfying its facts and `facts` within
/// `scopes`. Signatures missing from `scopes` get the default scope.
pub fn enumerate(
    model: &Model,
    facts: &[Formula],
    scopes: &BTreeMap<Ident, Scope>,
    opts: EnumerateOptions,
    visit: impl FnMut(&Instance),
) -> Result<EnumerationEnd, EvalError> {
    let mut e = Enumerator { model, facts, opts, visit, seen: 0, order: super::topological_sigs(model) };
    let tops: Vec<&SigDecl> = model.top_level().collect();
    match e.tops(&tops, scopes, 0, &mut Instance::default())? {
        Step::Go => Ok(EnumerationEnd::Exhausted),
        Step::Stop => Ok(EnumerationEnd::LimitReached),
    }
}

/// Collect every instance into a vector.
pub fn enumerate_all(
    model: &Model,
    facts: &[Formula],
    scopes: &BTreeMap<Ident, Scope>,
    opts: EnumerateOptions,
) -> Result<Vec<Instance>, EvalError> {
    let mut out = Vec::new();
    enumerate(model, facts, scopes, opts, |i| out.push(i.clone()))?;
    Ok(out)
}
