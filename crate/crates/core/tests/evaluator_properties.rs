mod common;

use std::collections::{BTreeMap, BTreeSet};

use alloytest_core::semantics::*;
use alloytest_core::solver::{enumerate_all, EnumerateOptions};
use alloytest_core::*;
use common::randmodel::{random_formula, random_model, RandomModel};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

type Rel = BTreeSet<Vec<u32>>;

/// Reference evaluator: relations as plain tuple sets, quantifiers expanded
/// into explicit conjunctions and disjunctions of substituted bodies.
struct Naive<'a> {
    model: &'a Model,
    inst: &'a Instance,
}

enum Bool {
    Lit(bool),
    And(Vec<Bool>),
    Or(Vec<Bool>),
    Not(Box<Bool>),
}

impl Bool {
    fn value(&self) -> bool {
        match self {
            Bool::Lit(b) => *b,
            Bool::And(xs) => xs.iter().all(Bool::value),
            Bool::Or(xs) => xs.iter().any(Bool::value),
            Bool::Not(x) => !x.value(),
        }
    }
}

impl Naive<'_> {
    fn univ(&self) -> Rel {
        self.model.top_level().flat_map(|s| self.inst.sig(&s.name).tuples).collect()
    }

    fn expr(&self, subst: &BTreeMap<String, u32>, e: &Expr) -> Rel {
        let join = |a: &Rel, b: &Rel| -> Rel {
            let mut out = Rel::new();
            for x in a {
                for y in b {
                    if x.last() == y.first() {
                        out.insert(x[..x.len() - 1].iter().chain(&y[1..]).copied().collect());
                    }
                }
            }
            out
        };
        match e {
            Expr::Sig(s) => self.inst.sig(s).tuples,
            Expr::Field { owner, name } => self.inst.field(owner, name).unwrap().tuples.clone(),
            Expr::Var(v) => [vec![subst[v]]].into(),
            Expr::Next(s) => self.inst.next[s].tuples.clone(),
            Expr::First(s) | Expr::Last(s) => {
                let next = &self.inst.next[s].tuples;
                let col = if matches!(e, Expr::First(_)) { 1 } else { 0 };
                self.inst.sig(s).tuples.into_iter().filter(|a| !next.iter().any(|t| t[col] == a[0])).collect()
            }
            Expr::None => Rel::new(),
            Expr::Univ => self.univ(),
            Expr::Iden => self.univ().into_iter().map(|a| vec![a[0], a[0]]).collect(),
            Expr::Unary(op, a) => {
                let r = self.expr(subst, a);
                match op {
                    UnaryOp::Transpose => r.iter().map(|t| vec![t[1], t[0]]).collect(),
                    UnaryOp::Closure | UnaryOp::ReflexiveClosure => {
                        let mut c = r.clone();
                        loop {
                            let next: Rel = c.union(&join(&c, &r)).cloned().collect();
                            if next == c {
                                break;
                            }
                            c = next;
                        }
                        if *op == UnaryOp::ReflexiveClosure {
                            c.extend(self.univ().into_iter().map(|a| vec![a[0], a[0]]));
                        }
                        c
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let (x, y) = (self.expr(subst, a), self.expr(subst, b));
                match op {
                    BinaryOp::Union => x.union(&y).cloned().collect(),
                    BinaryOp::Difference => x.difference(&y).cloned().collect(),
                    BinaryOp::Intersection => x.intersection(&y).cloned().collect(),
                    BinaryOp::Product => {
                        x.iter().flat_map(|s| y.iter().map(move |t| s.iter().chain(t).copied().collect())).collect()
                    }
                    BinaryOp::Join => join(&x, &y),
                    BinaryOp::DomainRestrict => y.into_iter().filter(|t| x.contains(&vec![t[0]])).collect(),
                    BinaryOp::RangeRestrict => x.into_iter().filter(|t| y.contains(&vec![*t.last().unwrap()])).collect(),
                }
            }
            other => panic!("not generated: {other:?}"),
        }
    }

    fn expand(&self, subst: &mut BTreeMap<String, u32>, f: &Formula) -> Bool {
        match &f.kind {
            FormulaKind::Compare(op, a, b) => {
                let (x, y) = (self.expr(subst, a), self.expr(subst, b));
                Bool::Lit(match op {
                    CompareOp::In => x.is_subset(&y),
                    CompareOp::NotIn => !x.is_subset(&y),
                    CompareOp::Eq => x == y,
                    CompareOp::NotEq => x != y,
                })
            }
            FormulaKind::Mult(t, e) => {
                let n = self.expr(subst, e).len();
                Bool::Lit(match t {
                    MultTest::No => n == 0,
                    MultTest::Some => n > 0,
                    MultTest::Lone => n <= 1,
                    MultTest::One => n == 1,
                })
            }
            FormulaKind::Not(g) => Bool::Not(Box::new(self.expand(subst, g))),
            FormulaKind::Binary(op, a, b) => {
                let (x, y) = (self.expand(subst, a), self.expand(subst, b));
                match op {
                    Logic::And => Bool::And(vec![x, y]),
                    Logic::Or => Bool::Or(vec![x, y]),
                    Logic::Implies => Bool::Or(vec![Bool::Not(Box::new(x)), y]),
                    Logic::Iff => Bool::Lit(x.value() == y.value()),
                }
            }
            FormulaKind::IfElse(c, a, b) => {
                let c = self.expand(subst, c).value();
                if c {
                    self.expand(subst, a)
                } else {
                    self.expand(subst, b)
                }
            }
            FormulaKind::Block(fs) => Bool::And(fs.iter().map(|g| self.expand(subst, g)).collect()),
            FormulaKind::Quant { quant, decls, body } => {
                let mut instances = Vec::new();
                self.bindings(subst, decls, body, &mut instances);
                let not = |b: Bool| Bool::Not(Box::new(b));
                match quant {
                    Quantifier::All => Bool::And(instances),
                    Quantifier::Some => Bool::Or(instances),
                    Quantifier::No => not(Bool::Or(instances)),
                    Quantifier::Lone | Quantifier::One => {
                        let vals: Vec<bool> = instances.iter().map(Bool::value).collect();
                        let two = (0..vals.len())
                            .flat_map(|i| (i + 1..vals.len()).map(move |j| (i, j)))
                            .map(|(i, j)| Bool::And(vec![Bool::Lit(vals[i]), Bool::Lit(vals[j])]))
                            .collect();
                        let lone = not(Bool::Or(two));
                        if *quant == Quantifier::Lone {
                            lone
                        } else {
                            Bool::And(vec![lone, Bool::Or(instances)])
                        }
                    }
                }
            }
            FormulaKind::Call(..) => panic!("not generated"),
        }
    }

    /// One expanded body per binding of the declared variables.
    fn bindings(&self, subst: &mut BTreeMap<String, u32>, decls: &[Decl], body: &Formula, out: &mut Vec<Bool>) {
        let flat: Vec<(usize, &String)> =
            decls.iter().enumerate().flat_map(|(i, d)| d.names.iter().map(move |n| (i, n))).collect();
        self.assign(subst, decls, &flat, 0, body, out);
    }

    fn assign(
        &self,
        subst: &mut BTreeMap<String, u32>,
        decls: &[Decl],
        flat: &[(usize, &String)],
        k: usize,
        body: &Formula,
        out: &mut Vec<Bool>,
    ) {
        let Some(&(di, name)) = flat.get(k) else {
            out.push(self.expand(subst, body));
            return;
        };
        let bound = self.expr(subst, &decls[di].bound);
        for t in bound {
            let a = t[0];
            let clash = decls[di].disj
                && flat[..k].iter().any(|(dj, other)| *dj == di && subst.get(*other) == Some(&a));
            if clash {
                continue;
            }
            let old = subst.insert(name.clone(), a);
            self.assign(subst, decls, flat, k + 1, body, out);
            match old {
                Some(o) => subst.insert(name.clone(), o),
                None => subst.remove(name),
            };
        }
    }
}

/// A random model with a handful of its instances (universe of at most 4 atoms).
fn sample(rng: &mut StdRng) -> (RandomModel, Model, Vec<Instance>) {
    loop {
        let mut rm = random_model(rng);
        rm.fact = None;
        let Ok(m) = parse_model(&rm.source()) else { continue };
        let scopes = m.top_level().map(|s| (s.name.clone(), Scope { bound: 2, exact: false })).collect();
        let all = enumerate_all(&m, &[], &scopes, EnumerateOptions { limit: Some(400), symmetry_breaking: false }).unwrap();
        if all.is_empty() {
            continue;
        }
        let picked = (0..6).map(|_| all.choose(rng).unwrap().clone()).collect();
        return (rm, m, picked);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn agrees_with_quantifier_expansion(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (rm, m, insts) = sample(&mut rng);
        let text = random_formula(&rm, &mut rng, 3, &mut Vec::new());
        let f = parse_formula(&m, &text).unwrap();
        for inst in &insts {
            let fast = eval_formula(&m, inst, &Env::new(), &f).unwrap();
            let naive = Naive { model: &m, inst }.expand(&mut BTreeMap::new(), &f).value();
            prop_assert_eq!(fast, naive, "{}\n{}\n{}", rm.source(), text, inst);
        }
    }

    #[test]
    fn quantifier_duality(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (rm, m, insts) = sample(&mut rng);
        let sig = rm.sigs.choose(&mut rng).unwrap().name.clone();
        let mut vars = vec![("x".to_string(), sig.clone())];
        let body = random_formula(&rm, &mut rng, 2, &mut vars);
        let lhs = parse_formula(&m, &format!("not (all x: {sig} | {body})")).unwrap();
        let rhs = parse_formula(&m, &format!("some x: {sig} | not ({body})")).unwrap();
        let lhs2 = parse_formula(&m, &format!("not (some x: {sig} | {body})")).unwrap();
        let rhs2 = parse_formula(&m, &format!("all x: {sig} | not ({body})")).unwrap();
        for inst in &insts {
            let ev = |f: &Formula| eval_formula(&m, inst, &Env::new(), f).unwrap();
            prop_assert_eq!(ev(&lhs), ev(&rhs));
            prop_assert_eq!(ev(&lhs2), ev(&rhs2));
        }
    }

    #[test]
    fn algebraic_laws(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (rm, m, insts) = sample(&mut rng);
        let Some(f) = rm.fields.choose(&mut rng) else { return Ok(()) };
        let relations = [f.name.clone(), format!("~{}", f.name), "iden".into(), format!("{} -> {}", rm.sigs[0].name, f.column)];
        let pick = |rng: &mut StdRng| relations.choose(rng).unwrap().clone();
        let (a, b) = (pick(&mut rng), pick(&mut rng));
        let expr = |text: &str| -> Expr {
            let f = parse_formula(&m, &format!("some {text}")).unwrap();
            let FormulaKind::Mult(_, e) = f.kind else { unreachable!() };
            e
        };
        let (ea, eb) = (expr(&a), expr(&b));
        let union = expr(&format!("({a}) + ({b})"));
        let inter = expr(&format!("({a}) & ({b})"));
        let closure = expr(&format!("^({a})"));
        for inst in &insts {
            let ev = |e: &Expr| eval_expr(&m, inst, &Env::new(), e).unwrap();
            let (va, vb) = (ev(&ea), ev(&eb));
            prop_assert_eq!(ev(&union), va.union(&vb));
            prop_assert!(ev(&inter).is_subset(&va));
            let c = ev(&closure);
            prop_assert!(va.is_subset(&c));
            prop_assert!(c.join(&c).is_subset(&c));
        }
    }

    #[test]
    fn one_and_lone_quantifiers_count_bindings(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (rm, m, insts) = sample(&mut rng);
        let sig = rm.sigs.choose(&mut rng).unwrap().name.clone();
        let mut vars = vec![("x".to_string(), sig.clone())];
        let body = random_formula(&rm, &mut rng, 1, &mut vars);
        let q = |q: &str| parse_formula(&m, &format!("{q} x: {sig} | {body}")).unwrap();
        let open = parse_formula_in_env(&m, &sig, &body);
        for inst in &insts {
            let holds = |f: &Formula| eval_formula(&m, inst, &Env::new(), f).unwrap();
            let count = inst.sig(&sig).atoms().filter(|a| {
                let mut env = Env::new();
                env.bind_atom("x", *a);
                eval_formula(&m, inst, &env, &open).unwrap()
            }).count();
            prop_assert_eq!(holds(&q("one")), count == 1);
            prop_assert_eq!(holds(&q("lone")), count <= 1);
            prop_assert_eq!(holds(&q("no")), count == 0);
        }
    }
}

/// Resolve `body` with a free variable `x` bound by `sig`.
fn parse_formula_in_env(m: &Model, sig: &str, body: &str) -> Formula {
    let f = parse_formula(m, &format!("all x: {sig} | {body}")).unwrap();
    let FormulaKind::Quant { body, .. } = f.kind else { unreachable!() };
    *body
}
