//! Bounded satisfiability checking of `run` commands.
//!
//! Test commands written in the `some disj` style are decided directly from
//! the instance they describe. Other commands go through a backtracking
//! search over signature sizes, signature memberships and field tuples,
//! pruned by three-valued evaluation of every constraint.

pub mod enumerate;
mod extract;
pub mod partial;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use crate::ast::*;
use crate::semantics::{
    check_scopes, check_structure, isomorphic, satisfies_all, Atom, AtomId, EvalError, Instance,
    RelationValue,
};

pub use enumerate::{enumerate, enumerate_all, EnumerateOptions, EnumerationEnd};
pub use extract::extract_valuation;
use partial::{Bounds, PartialEvaluator, PartialInstance, Tri};

/// Resource limits for one solver call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_candidates: u64,
    pub max_time: Duration,
}

impl Default for Budget {
    fn default() -> Budget {
        Budget { max_candidates: 10_000_000, max_time: Duration::from_secs(10) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Sat(Instance),
    Unsat,
    /// The budget ran out before the search finished.
    Inconclusive(String),
}

impl Outcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, Outcome::Sat(_))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    /// Search nodes or candidate instances examined.
    pub candidates: u64,
    pub elapsed: Duration,
    /// Whether the command was decided from its explicit valuation.
    pub fast_path: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub outcome: Outcome,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("scope given for `{0}`, which is not a top-level signature")]
    Scope(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn validate_scopes(model: &Model, cmd: &RunCommand) -> Result<(), SolveError> {
    for k in cmd.scopes.keys() {
        if !model.sig(k).is_some_and(|s| s.kind == SigKind::TopLevel) {
            return Err(SolveError::Scope(k.clone()));
        }
    }
    Ok(())
}

/// Decide `model.facts && extra && cmd.body` within the command's scopes.
pub fn solve(model: &Model, extra: &[Formula], cmd: &RunCommand, budget: &Budget) -> Result<SolveResult, SolveError> {
    validate_scopes(model, cmd)?;
    let start = Instant::now();
    if let Some(v) = extract::analyze(model, cmd) {
        let mut candidates = 0;
        let mut outcome = Outcome::Unsat;
        for inst in v.candidates() {
            candidates += 1;
            if v.holds(model, &inst, extra, cmd)? {
                outcome = Outcome::Sat(inst);
                break;
            }
        }
        let stats = Stats { candidates, elapsed: start.elapsed(), fast_path: true };
        return Ok(SolveResult { outcome, stats });
    }
    solve_by_search(model, extra, cmd, budget)
}

/// Like [`solve`], but never takes the explicit-valuation shortcut.
pub fn solve_by_search(
    model: &Model,
    extra: &[Formula],
    cmd: &RunCommand,
    budget: &Budget,
) -> Result<SolveResult, SolveError> {
    validate_scopes(model, cmd)?;
    Search::new(model, extra, cmd, *budget, None).run()
}

/// Look for a witness of the command that is not isomorphic to `avoid`.
/// `Unsat` means the command has a unique instance up to isomorphism.
pub fn distinct_witness(
    model: &Model,
    extra: &[Formula],
    cmd: &RunCommand,
    avoid: &Instance,
    budget: &Budget,
) -> Result<SolveResult, SolveError> {
    validate_scopes(model, cmd)?;
    Search::new(model, extra, cmd, *budget, Some(avoid)).run()
}

#[derive(Debug, Clone)]
enum Decision {
    Member { sig: Ident, parent: Ident, atom: AtomId },
    Tuple { owner: Ident, name: Ident, cols: Vec<Ident>, tuple: Vec<AtomId> },
}

enum Flow {
    Continue,
    Found(Instance),
    OutOfBudget,
}

struct Search<'a> {
    model: &'a Model,
    cmd: &'a RunCommand,
    extra: &'a [Formula],
    conjuncts: Vec<Formula>,
    budget: Budget,
    start: Instant,
    candidates: u64,
    avoid: Option<&'a Instance>,
    referenced: Referenced,
}

#[derive(Default)]
struct Referenced {
    sigs: BTreeSet<Ident>,
    fields: BTreeSet<(Ident, Ident)>,
}

fn flatten(f: &Formula, out: &mut Vec<Formula>) {
    match &f.kind {
        FormulaKind::Block(fs) => fs.iter().for_each(|g| flatten(g, out)),
        FormulaKind::Binary(Logic::And, a, b) => {
            flatten(a, out);
            flatten(b, out);
        }
        _ => out.push(f.clone()),
    }
}

fn var(n: usize) -> Ident {
    format!("${n}")
}

/// Declaration constraints that the search does not enforce by construction.
fn structural_constraints(model: &Model) -> Vec<Formula> {
    let sig = |s: &str| Expr::Sig(s.to_string());
    let mut out = Vec::new();
    for s in &model.sigs {
        if let Some(p) = s.parent() {
            out.push(Formula::new(FormulaKind::Compare(CompareOp::In, sig(&s.name), sig(p))));
        }
        if let Some(m) = s.multiplicity {
            let test = match m {
                SigMult::One => MultTest::One,
                SigMult::Lone => MultTest::Lone,
                SigMult::Some => MultTest::Some,
            };
            out.push(Formula::new(FormulaKind::Mult(test, sig(&s.name))));
        }
        let exts: Vec<&SigDecl> = model.extensions(&s.name).collect();
        for (i, a) in exts.iter().enumerate() {
            for b in &exts[i + 1..] {
                let both = Expr::binary(BinaryOp::Intersection, sig(&a.name), sig(&b.name));
                out.push(Formula::new(FormulaKind::Mult(MultTest::No, both)));
            }
        }
        if s.is_abstract {
            let f = match exts.split_first() {
                None => FormulaKind::Mult(MultTest::No, sig(&s.name)),
                Some((first, rest)) => {
                    let union = rest
                        .iter()
                        .fold(sig(&first.name), |acc, e| Expr::binary(BinaryOp::Union, acc, sig(&e.name)));
                    FormulaKind::Compare(CompareOp::Eq, sig(&s.name), union)
                }
            };
            out.push(Formula::new(f));
        }
    }
    for f in model.fields() {
        let rel = Expr::Field { owner: f.owner.clone(), name: f.name.clone() };
        let ty = f.columns.iter().fold(sig(&f.owner), |acc, c| Expr::binary(BinaryOp::Product, acc, sig(c)));
        out.push(Formula::new(FormulaKind::Compare(CompareOp::In, rel.clone(), ty)));
        let test = match f.multiplicity {
            Multiplicity::Set => continue,
            Multiplicity::Lone => MultTest::Lone,
            Multiplicity::One => MultTest::One,
            Multiplicity::Some => MultTest::Some,
        };
        // all $0: Owner, $1: C1, ... | test $k-1.(... ($0.f))
        let prefix: Vec<&Ident> = std::iter::once(&f.owner).chain(&f.columns[..f.columns.len() - 1]).collect();
        let decls: Vec<Decl> = prefix
            .iter()
            .enumerate()
            .map(|(i, s)| Decl { disj: false, names: vec![var(i)], bound: sig(s) })
            .collect();
        let mut image = rel;
        for i in 0..prefix.len() {
            image = Expr::binary(BinaryOp::Join, Expr::Var(var(i)), image);
        }
        let body = Formula::new(FormulaKind::Mult(test, image));
        out.push(Formula::new(FormulaKind::Quant { quant: Quantifier::All, decls, body: Box::new(body) }));
    }
    out
}

fn collect_refs(model: &Model, f: &Formula, refs: &mut Referenced, seen: &mut BTreeSet<Ident>) {
    match &f.kind {
        FormulaKind::Compare(_, a, b) => {
            expr_refs(model, a, refs, seen);
            expr_refs(model, b, refs, seen);
        }
        FormulaKind::Mult(_, e) => expr_refs(model, e, refs, seen),
        FormulaKind::Not(g) => collect_refs(model, g, refs, seen),
        FormulaKind::Binary(_, a, b) => {
            collect_refs(model, a, refs, seen);
            collect_refs(model, b, refs, seen);
        }
        FormulaKind::IfElse(a, b, c) => {
            collect_refs(model, a, refs, seen);
            collect_refs(model, b, refs, seen);
            collect_refs(model, c, refs, seen);
        }
        FormulaKind::Block(fs) => fs.iter().for_each(|g| collect_refs(model, g, refs, seen)),
        FormulaKind::Quant { decls, body, .. } => {
            for d in decls {
                expr_refs(model, &d.bound, refs, seen);
            }
            collect_refs(model, body, refs, seen);
        }
        FormulaKind::Call(n, args) => {
            for a in args {
                expr_refs(model, a, refs, seen);
            }
            if seen.insert(n.clone()) {
                if let Some(p) = model.pred(n) {
                    for prm in &p.params {
                        expr_refs(model, &prm.bound, refs, seen);
                    }
                    collect_refs(model, &p.body, refs, seen);
                }
            }
        }
    }
}

fn expr_refs(model: &Model, e: &Expr, refs: &mut Referenced, seen: &mut BTreeSet<Ident>) {
    match e {
        Expr::Name(n) => {
            if model.sig(n).is_some() {
                refs.sigs.insert(n.clone());
            }
            for f in model.fields_named(n) {
                refs.fields.insert((f.owner.clone(), f.name.clone()));
            }
        }
        Expr::Sig(s) | Expr::Next(s) | Expr::First(s) | Expr::Last(s) => {
            refs.sigs.insert(s.clone());
        }
        Expr::Field { owner, name } => {
            refs.fields.insert((owner.clone(), name.clone()));
        }
        Expr::Var(_) | Expr::None | Expr::Univ | Expr::Iden => {}
        Expr::Unary(_, a) => expr_refs(model, a, refs, seen),
        Expr::Binary(_, a, b) => {
            expr_refs(model, a, refs, seen);
            expr_refs(model, b, refs, seen);
        }
        Expr::BoxJoin(t, args) => {
            expr_refs(model, t, refs, seen);
            for a in args {
                expr_refs(model, a, refs, seen);
            }
            if let Expr::Name(n) = &**t {
                fun_refs(model, n, refs, seen);
            }
        }
        Expr::Call(n, args) => {
            for a in args {
                expr_refs(model, a, refs, seen);
            }
            fun_refs(model, n, refs, seen);
        }
    }
}

fn fun_refs(model: &Model, n: &str, refs: &mut Referenced, seen: &mut BTreeSet<Ident>) {
    if seen.insert(n.to_string()) {
        if let Some(f) = model.fun(n) {
            for p in &f.params {
                expr_refs(model, &p.bound, refs, seen);
            }
            expr_refs(model, &f.body, refs, seen);
        }
    }
}

/// Relations whose value matters. Every other relation can be left empty
/// without affecting satisfiability.
fn referenced(model: &Model, formulas: &[&Formula], everything: bool) -> Referenced {
    let mut refs = Referenced::default();
    if everything {
        refs.sigs = model.sigs.iter().map(|s| s.name.clone()).collect();
        refs.fields = model.fields().map(|f| (f.owner.clone(), f.name.clone())).collect();
        return refs;
    }
    let mut seen = BTreeSet::new();
    for f in formulas {
        collect_refs(model, f, &mut refs, &mut seen);
    }
    for s in &model.sigs {
        if matches!(s.multiplicity, Some(SigMult::One | SigMult::Some)) {
            refs.sigs.insert(s.name.clone());
        }
        if s.is_abstract {
            for e in model.extensions(&s.name) {
                refs.sigs.insert(e.name.clone());
            }
        }
    }
    for f in model.fields() {
        if matches!(f.multiplicity, Multiplicity::One | Multiplicity::Some) {
            refs.fields.insert((f.owner.clone(), f.name.clone()));
        }
    }
    for (o, n) in refs.fields.clone() {
        let f = model.field(&o, &n).expect("declared field");
        refs.sigs.insert(o.clone());
        refs.sigs.extend(f.columns.iter().cloned());
    }
    loop {
        let before = refs.sigs.len();
        for s in refs.sigs.clone() {
            if let Some(p) = model.sig(&s).and_then(|d| d.parent()) {
                refs.sigs.insert(p.to_string());
            }
        }
        if refs.sigs.len() == before {
            return refs;
        }
    }
}

/// Parents before children.
pub(crate) fn topological_sigs(model: &Model) -> Vec<&SigDecl> {
    let mut out: Vec<&SigDecl> = Vec::new();
    while out.len() < model.sigs.len() {
        let before = out.len();
        for s in &model.sigs {
            if out.iter().any(|o| o.name == s.name) {
                continue;
            }
            if s.parent().is_none_or(|p| out.iter().any(|o| o.name == p)) {
                out.push(s);
            }
        }
        if out.len() == before {
            break;
        }
    }
    out
}

impl<'a> Search<'a> {
    fn new(
        model: &'a Model,
        extra: &'a [Formula],
        cmd: &'a RunCommand,
        budget: Budget,
        avoid: Option<&'a Instance>,
    ) -> Search<'a> {
        let mut conjuncts = structural_constraints(model);
        for f in model.facts.iter().map(|f| &f.body).chain(extra).chain([&cmd.body]) {
            flatten(f, &mut conjuncts);
        }
        let mut user: Vec<&Formula> = model.facts.iter().map(|f| &f.body).collect();
        user.extend(extra);
        user.push(&cmd.body);
        let referenced = referenced(model, &user, avoid.is_some());
        Search {
            model,
            cmd,
            extra,
            conjuncts,
            budget,
            start: Instant::now(),
            candidates: 0,
            avoid,
            referenced,
        }
    }

    fn cardinality_range(&self, s: &SigDecl) -> (u32, u32) {
        let scope = self.cmd.scope_of(&s.name);
        let exact = scope.exact || self.model.is_ordered(&s.name);
        let (mut lo, mut hi) = (if exact { scope.bound } else { 0 }, scope.bound);
        match s.multiplicity {
            Some(SigMult::One) => {
                lo = lo.max(1);
                hi = hi.min(1);
            }
            Some(SigMult::Lone) => hi = hi.min(1),
            Some(SigMult::Some) => lo = lo.max(1),
            None => {}
        }
        if s.is_abstract && self.model.extensions(&s.name).next().is_none() {
            hi = 0;
        }
        (lo, hi)
    }

    fn run(mut self) -> Result<SolveResult, SolveError> {
        let tops: Vec<&SigDecl> = self.model.top_level().collect();
        let ranges: Vec<(u32, u32)> = tops.iter().map(|s| self.cardinality_range(s)).collect();
        let mut outcome = Outcome::Unsat;
        if ranges.iter().all(|(lo, hi)| lo <= hi) {
            let mut sizes: Vec<u32> = ranges.iter().map(|r| r.0).collect();
            'outer: loop {
                match self.with_sizes(&tops, &sizes)? {
                    Flow::Found(i) => {
                        outcome = Outcome::Sat(i);
                        break;
                    }
                    Flow::OutOfBudget => {
                        outcome = Outcome::Inconclusive(self.budget_message());
                        break;
                    }
                    Flow::Continue => {}
                }
                // odometer over the cardinality ranges
                for i in (0..sizes.len()).rev() {
                    if sizes[i] < ranges[i].1 {
                        sizes[i] += 1;
                        continue 'outer;
                    }
                    sizes[i] = ranges[i].0;
                }
                break;
            }
        }
        Ok(SolveResult {
            outcome,
            stats: Stats { candidates: self.candidates, elapsed: self.start.elapsed(), fast_path: false },
        })
    }

    fn budget_message(&self) -> String {
        if self.start.elapsed() >= self.budget.max_time {
            format!("time budget of {:?} exhausted", self.budget.max_time)
        } else {
            format!("candidate budget of {} exhausted", self.budget.max_candidates)
        }
    }

    fn with_sizes(&mut self, tops: &[&SigDecl], sizes: &[u32]) -> Result<Flow, SolveError> {
        let model = self.model;
        let mut universe = Vec::new();
        let mut type_atoms: HashMap<&str, RelationValue> = HashMap::new();
        for (s, &k) in tops.iter().zip(sizes) {
            let mut atoms = Vec::new();
            for j in 0..k {
                let id = universe.len() as AtomId;
                universe.push(Atom { id, sig: s.name.clone(), name: format!("{}${j}", s.name) });
                atoms.push(id);
            }
            type_atoms.insert(&s.name, RelationValue::set(atoms));
        }
        let of_type = |s: &str| type_atoms[model.top_of(s).expect("declared signature")].clone();
        let mut pi = PartialInstance {
            sigs: HashMap::new(),
            fields: HashMap::new(),
            next: HashMap::new(),
            univ: RelationValue::set(0..universe.len() as AtomId),
        };
        let mut decisions = Vec::new();
        for s in topological_sigs(model) {
            let b = match s.parent() {
                None => Bounds::exact(of_type(&s.name)),
                Some(p) if self.referenced.sigs.contains(&s.name) => {
                    let all = of_type(&s.name);
                    for a in all.atoms() {
                        decisions.push(Decision::Member { sig: s.name.clone(), parent: p.to_string(), atom: a });
                    }
                    Bounds { lo: RelationValue::empty(1), hi: all }
                }
                Some(_) => Bounds::exact(RelationValue::empty(1)),
            };
            pi.sigs.insert(s.name.clone(), b);
        }
        for f in model.fields() {
            let key = (f.owner.clone(), f.name.clone());
            let b = if self.referenced.fields.contains(&key) {
                let cols: Vec<Ident> = std::iter::once(&f.owner).chain(&f.columns).cloned().collect();
                let all = cols.iter().skip(1).fold(of_type(&cols[0]), |acc, c| acc.product(&of_type(c)));
                for t in &all.tuples {
                    decisions.push(Decision::Tuple {
                        owner: f.owner.clone(),
                        name: f.name.clone(),
                        cols: cols.clone(),
                        tuple: t.clone(),
                    });
                }
                Bounds { lo: RelationValue::empty(f.arity()), hi: all }
            } else {
                Bounds::exact(RelationValue::empty(f.arity()))
            };
            pi.fields.entry(f.owner.clone()).or_default().insert(f.name.clone(), b);
        }
        for o in &model.orderings {
            let atoms: Vec<AtomId> = of_type(o).atoms().collect();
            pi.next.insert(o.clone(), RelationValue::from_tuples(2, atoms.windows(2).map(|w| w.to_vec())));
        }
        let mut settled = vec![false; self.conjuncts.len()];
        self.dfs(&mut pi, &universe, &decisions, 0, &mut settled)
    }

    fn out_of_budget(&self) -> bool {
        self.candidates >= self.budget.max_candidates
            || (self.candidates.is_multiple_of(256) && self.start.elapsed() >= self.budget.max_time)
    }

    fn dfs(
        &mut self,
        pi: &mut PartialInstance,
        universe: &[Atom],
        decisions: &[Decision],
        d: usize,
        settled: &mut Vec<bool>,
    ) -> Result<Flow, SolveError> {
        self.candidates += 1;
        if self.out_of_budget() {
            return Ok(Flow::OutOfBudget);
        }
        let mut newly = Vec::new();
        let mut verdict = Tri::True;
        {
            let ev = PartialEvaluator::new(self.model, pi);
            for (i, f) in self.conjuncts.iter().enumerate() {
                if settled[i] {
                    continue;
                }
                match ev.formula(&mut Vec::new(), f)? {
                    Tri::True => newly.push(i),
                    Tri::False => {
                        verdict = Tri::False;
                        break;
                    }
                    Tri::Unknown => verdict = Tri::Unknown,
                }
            }
        }
        if verdict == Tri::False {
            return Ok(Flow::Continue);
        }
        for &i in &newly {
            settled[i] = true;
        }
        let flow = self.branch(pi, universe, decisions, d, settled, verdict);
        for &i in &newly {
            settled[i] = false;
        }
        flow
    }

    fn branch(
        &mut self,
        pi: &mut PartialInstance,
        universe: &[Atom],
        decisions: &[Decision],
        d: usize,
        settled: &mut Vec<bool>,
        verdict: Tri,
    ) -> Result<Flow, SolveError> {
        let complete = d == decisions.len();
        if verdict == Tri::True && (self.avoid.is_none() || complete) {
            let inst = self.lower_instance(pi, universe);
            if self.accept(&inst)? {
                return Ok(Flow::Found(inst));
            }
            if complete {
                return Ok(Flow::Continue);
            }
        }
        if complete {
            return Ok(Flow::Continue);
        }
        let forced_out = match &decisions[d] {
            Decision::Member { parent, atom, .. } => !pi.sigs[parent].hi.contains(&[*atom]),
            Decision::Tuple { cols, tuple, .. } => {
                cols.iter().zip(tuple).any(|(c, a)| !pi.sigs[c].hi.contains(&[*a]))
            }
        };
        let choices: &[bool] = if forced_out { &[false] } else { &[false, true] };
        for &present in choices {
            self.set(pi, &decisions[d], present, true);
            let flow = self.dfs(pi, universe, decisions, d + 1, settled)?;
            self.set(pi, &decisions[d], present, false);
            if !matches!(flow, Flow::Continue) {
                return Ok(flow);
            }
        }
        Ok(Flow::Continue)
    }

    /// Apply (`on`) or undo a decision.
    fn set(&self, pi: &mut PartialInstance, d: &Decision, present: bool, on: bool) {
        let (b, t) = match d {
            Decision::Member { sig, atom, .. } => (pi.sigs.get_mut(sig).unwrap(), vec![*atom]),
            Decision::Tuple { owner, name, tuple, .. } => (pi.field_mut(owner, name).unwrap(), tuple.clone()),
        };
        match (present, on) {
            (true, true) => {
                b.lo.tuples.insert(t);
            }
            (true, false) => {
                b.lo.tuples.remove(&t);
            }
            (false, true) => {
                b.hi.tuples.remove(&t);
            }
            (false, false) => {
                b.hi.tuples.insert(t);
            }
        }
    }

    fn lower_instance(&self, pi: &PartialInstance, universe: &[Atom]) -> Instance {
        let mut inst = Instance { universe: universe.to_vec(), ..Instance::default() };
        for s in &self.model.sigs {
            inst.sigs.insert(s.name.clone(), pi.sigs[&s.name].lo.clone());
        }
        for f in self.model.fields() {
            let v = pi.field(&f.owner, &f.name).unwrap().lo.clone();
            inst.fields.insert((f.owner.clone(), f.name.clone()), v);
        }
        for (o, n) in &pi.next {
            inst.next.insert(o.clone(), n.clone());
        }
        inst
    }

    /// Exact re-check of a candidate witness.
    fn accept(&self, inst: &Instance) -> Result<bool, SolveError> {
        if check_structure(self.model, inst).is_err() || check_scopes(self.model, inst, self.cmd).is_err() {
            return Ok(false);
        }
        let mut all: Vec<&Formula> = self.extra.iter().collect();
        all.push(&self.cmd.body);
        if !satisfies_all(self.model, inst, &all)? {
            return Ok(false);
        }
        Ok(self.avoid.is_none_or(|a| !isomorphic(self.model, a, inst)))
    }
}

/// Scopes of a command as a map over every top-level signature.
pub fn command_scopes(model: &Model, cmd: &RunCommand) -> BTreeMap<Ident, Scope> {
    model.top_level().map(|s| (s.name.clone(), cmd.scope_of(&s.name))).collect()
}
