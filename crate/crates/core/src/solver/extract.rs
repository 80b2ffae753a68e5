//! Direct construction of the instance described by a `some disj` test.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::semantics::{
    check_scopes, check_structure, satisfies_all, Atom, AtomId, Env, EvalError, Evaluator, Instance,
    RelationValue,
};

/// A command body of the form `some disj ... | { relation = ground, ... }`
/// analysed into the instance it denotes.
pub(crate) struct Valuation {
    pub template: Instance,
    /// Each quantified variable bound to its own atom.
    pub env: Env,
    decls: Vec<Decl>,
    inner: Formula,
    /// Top-level conjuncts outside the quantifier.
    outside: Vec<Formula>,
    /// Ordered signatures whose successor relation is not given.
    pub open_orders: Vec<Ident>,
}

fn conjuncts<'f>(f: &'f Formula, out: &mut Vec<&'f Formula>) {
    match &f.kind {
        FormulaKind::Block(fs) => fs.iter().for_each(|g| conjuncts(g, out)),
        FormulaKind::Binary(Logic::And, a, b) => {
            conjuncts(a, out);
            conjuncts(b, out);
        }
        _ => out.push(f),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Target {
    Sig(Ident),
    Field(Ident, Ident),
    Next(Ident),
}

fn target(e: &Expr) -> Option<Target> {
    match e {
        Expr::Sig(s) => Some(Target::Sig(s.clone())),
        Expr::Field { owner, name } => Some(Target::Field(owner.clone(), name.clone())),
        Expr::Next(s) => Some(Target::Next(s.clone())),
        Expr::Binary(BinaryOp::DomainRestrict, d, r) => match (&**d, &**r) {
            (Expr::Sig(s), Expr::Field { owner, name }) if s == owner => {
                Some(Target::Field(owner.clone(), name.clone()))
            }
            (Expr::Sig(s), Expr::Next(o)) if s == o => Some(Target::Next(o.clone())),
            _ => None,
        },
        _ => None,
    }
}

fn ground(e: &Expr, vars: &BTreeSet<&str>) -> bool {
    match e {
        Expr::Var(v) => vars.contains(v.as_str()),
        Expr::None => true,
        Expr::Binary(BinaryOp::Union | BinaryOp::Product, a, b) => ground(a, vars) && ground(b, vars),
        _ => false,
    }
}

pub(crate) fn analyze(model: &Model, cmd: &RunCommand) -> Option<Valuation> {
    let mut body = &cmd.body;
    if let FormulaKind::Call(n, args) = &body.kind {
        let p = model.pred(n)?;
        if !args.is_empty() || !p.params.is_empty() {
            return None;
        }
        body = &p.body;
    }
    let mut top = Vec::new();
    conjuncts(body, &mut top);
    let qi = top
        .iter()
        .position(|f| matches!(&f.kind, FormulaKind::Quant { quant: Quantifier::Some, .. }))?;
    let outside: Vec<Formula> =
        top.iter().enumerate().filter(|(i, _)| *i != qi).map(|(_, f)| (*f).clone()).collect();

    // Follow the chain of existential quantifiers.
    let mut decls = Vec::new();
    let mut cur = top[qi];
    loop {
        match &cur.kind {
            FormulaKind::Quant { quant: Quantifier::Some, decls: ds, body } => {
                decls.extend(ds.iter().cloned());
                cur = body;
            }
            FormulaKind::Block(fs) if fs.len() == 1 => cur = &fs[0],
            _ => break,
        }
    }
    let inner = cur.clone();

    let mut vars: Vec<(Ident, Ident, usize)> = Vec::new(); // (name, top sig, decl index)
    for (i, d) in decls.iter().enumerate() {
        let Expr::Sig(s) = &d.bound else { return None };
        let top_sig = model.top_of(s)?.to_string();
        for n in &d.names {
            if vars.iter().any(|(v, ..)| v == n) {
                return None;
            }
            vars.push((n.clone(), top_sig.clone(), i));
        }
    }
    // Variables of one type must be forced pairwise distinct.
    let mut by_type: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (_, t, d) in &vars {
        by_type.entry(t.as_str()).or_default().push(*d);
    }
    for ds in by_type.values() {
        if ds.len() > 1 && !(ds.iter().all(|d| *d == ds[0]) && decls[ds[0]].disj) {
            return None;
        }
    }

    let names: BTreeSet<&str> = vars.iter().map(|(n, ..)| n.as_str()).collect();
    let mut defs: BTreeMap<Target, &Expr> = BTreeMap::new();
    let mut items = Vec::new();
    conjuncts(&inner, &mut items);
    for f in items {
        if let FormulaKind::Compare(CompareOp::Eq, l, r) = &f.kind {
            if let Some(t) = target(l) {
                if ground(r, &names) {
                    defs.entry(t).or_insert(r);
                }
            }
        }
    }
    for s in &model.sigs {
        if !defs.contains_key(&Target::Sig(s.name.clone())) {
            return None;
        }
    }
    for f in model.fields() {
        if !defs.contains_key(&Target::Field(f.owner.clone(), f.name.clone())) {
            return None;
        }
    }

    let mut universe = Vec::new();
    let mut env = Env::new();
    for (i, (n, t, _)) in vars.iter().enumerate() {
        universe.push(Atom { id: i as AtomId, sig: t.clone(), name: n.clone() });
        env.bind_atom(n.clone(), i as AtomId);
    }
    let empty = Instance::default();
    let ev = Evaluator::new(model, &empty);
    let value = |e: &Expr, env: &Env| -> Option<RelationValue> { ev.expr(&mut env.clone(), e).ok() };
    let mut template = Instance { universe, ..Instance::default() };
    for s in &model.sigs {
        template.sigs.insert(s.name.clone(), value(defs[&Target::Sig(s.name.clone())], &env)?);
    }
    for f in model.fields() {
        let v = value(defs[&Target::Field(f.owner.clone(), f.name.clone())], &env)?;
        template.fields.insert((f.owner.clone(), f.name.clone()), v);
    }
    let mut open_orders = Vec::new();
    for o in &model.orderings {
        match defs.get(&Target::Next(o.clone())) {
            Some(e) => {
                template.next.insert(o.clone(), value(e, &env)?);
            }
            None if template.sig(o).len() <= 1 => {
                template.next.insert(o.clone(), RelationValue::empty(2));
            }
            None => open_orders.push(o.clone()),
        }
    }
    Some(Valuation { template, env, decls, inner, outside, open_orders })
}

/// The instance fully described by a `some disj` test body, if the body has
/// that shape and gives a value to every signature, field and ordering.
pub fn extract_valuation(model: &Model, cmd: &RunCommand) -> Option<Instance> {
    let v = analyze(model, cmd)?;
    v.open_orders.is_empty().then_some(v.template)
}

impl Valuation {
    /// Candidate instances: the template under every successor relation
    /// for the orderings the test leaves open.
    pub fn candidates(&self) -> Vec<Instance> {
        let mut out = vec![self.template.clone()];
        for o in &self.open_orders {
            let atoms: Vec<AtomId> = self.template.sig(o).atoms().collect();
            let mut next_out = Vec::new();
            for inst in &out {
                for perm in permutations(&atoms) {
                    let mut i = inst.clone();
                    i.next.insert(o.clone(), RelationValue::from_tuples(2, perm.windows(2).map(|w| w.to_vec())));
                    next_out.push(i);
                }
            }
            out = next_out;
        }
        out
    }

    /// Whether `inst` (one of the candidates) satisfies the model, the extra
    /// facts and the command within its scopes. Because every relation is
    /// pinned down by the quantified variables, only the intended binding of
    /// the variables needs to be checked.
    pub fn holds(
        &self,
        model: &Model,
        inst: &Instance,
        extra: &[Formula],
        cmd: &RunCommand,
    ) -> Result<bool, EvalError> {
        if check_structure(model, inst).is_err() || check_scopes(model, inst, cmd).is_err() {
            return Ok(false);
        }
        let mut all: Vec<&Formula> = extra.iter().collect();
        all.extend(self.outside.iter());
        if !satisfies_all(model, inst, &all)? {
            return Ok(false);
        }
        let ev = Evaluator::new(model, inst);
        let mut env = self.env.clone();
        for d in &self.decls {
            let bound = ev.expr(&mut env, &d.bound)?;
            for n in &d.names {
                if !env.get(n).is_some_and(|v| v.is_subset(&bound)) {
                    return Ok(false);
                }
            }
        }
        ev.formula(&mut env, &self.inner)
    }
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
