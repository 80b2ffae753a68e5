//! Detection of wrong specifications by valid test suites.

use std::collections::BTreeMap;

use alloytest_core::solver::{solve, Budget, Outcome};
use alloytest_core::{
    Expect, Formula, FormulaKind, Ident, Logic, Model, PredDecl, Requirement, RunCommand, Scope,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pipeline::{oracles, PipelineError};

/// A presumably incorrect formalization of a requirement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrongSpec {
    pub requirement: usize,
    pub name: Ident,
    pub formula: Formula,
    /// How often this formalization was submitted.
    pub frequency: Option<u32>,
}

impl WrongSpec {
    /// From a parameterless predicate; a `freq: n` comment sets the frequency.
    pub fn from_pred(requirement: usize, p: &PredDecl) -> WrongSpec {
        let frequency = p.comment.as_deref().and_then(|c| {
            c.lines().find_map(|l| l.trim().strip_prefix("freq:").and_then(|n| n.trim().parse().ok()))
        });
        WrongSpec { requirement, name: p.name.clone(), formula: p.body.clone(), frequency }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Detection {
    /// Test at this index disagreed with its expectation.
    Detected { test: usize },
    Missed,
    /// No test disagreed, but the budget ran out on at least one.
    Inconclusive,
}

impl Detection {
    pub fn detected(&self) -> bool {
        matches!(self, Detection::Detected { .. })
    }
}

/// Run every test of a valid suite for requirement `i` with the wrong
/// specification in place of the oracle.
pub fn detect(
    model: &Model,
    reqs: &[Requirement],
    i: usize,
    suite: &[RunCommand],
    w: &WrongSpec,
    budget: &Budget,
) -> Result<Detection, PipelineError> {
    let mut extra = oracles(model, reqs, i)?;
    extra.push(w.formula.clone());
    let mut inconclusive = false;
    for (k, t) in suite.iter().enumerate() {
        let expect_sat = t.expect == Some(Expect::Sat);
        match solve(model, &extra, t, budget)?.outcome {
            Outcome::Inconclusive(_) => inconclusive = true,
            o if o.is_sat() != expect_sat => return Ok(Detection::Detected { test: k }),
            _ => {}
        }
    }
    Ok(if inconclusive { Detection::Inconclusive } else { Detection::Missed })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementDetection {
    pub index: usize,
    pub complete: bool,
    pub wrong: usize,
    pub missed: usize,
    pub inconclusive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub n: usize,
    pub rows: Vec<RequirementDetection>,
    pub complete: usize,
    pub wrong: usize,
    pub missed: usize,
    pub inconclusive: usize,
    /// Mean over complete requirements of missed/wrong, in percent.
    pub mean_percent: f64,
}

impl DetectionReport {
    /// Totals over the complete requirements. The mean is taken over the
    /// complete requirements that have at least one wrong specification.
    pub fn aggregate(n: usize, rows: Vec<RequirementDetection>) -> DetectionReport {
        let done: Vec<&RequirementDetection> = rows.iter().filter(|r| r.complete).collect();
        let ratios: Vec<f64> =
            done.iter().filter(|r| r.wrong > 0).map(|r| r.missed as f64 / r.wrong as f64).collect();
        let mean_percent = if ratios.is_empty() { 0.0 } else { 100.0 * ratios.iter().sum::<f64>() / ratios.len() as f64 };
        DetectionReport {
            n,
            complete: done.len(),
            wrong: done.iter().map(|r| r.wrong).sum(),
            missed: done.iter().map(|r| r.missed).sum(),
            inconclusive: done.iter().map(|r| r.inconclusive).sum(),
            mean_percent,
            rows,
        }
    }
}

/// Detection statistics for suites of `2n` valid tests per requirement.
/// Requirements whose suite has fewer valid tests are not complete and do
/// not contribute to the totals.
pub fn detection_report(
    model: &Model,
    reqs: &[Requirement],
    suites: &BTreeMap<usize, Vec<RunCommand>>,
    wrongs: &BTreeMap<usize, Vec<WrongSpec>>,
    n: usize,
    budget: &Budget,
) -> Result<DetectionReport, PipelineError> {
    let rows = reqs
        .par_iter()
        .map(|req| {
            let i = req.index;
            let suite = suites.get(&i).map(Vec::as_slice).unwrap_or_default();
            let pool = wrongs.get(&i).map(Vec::as_slice).unwrap_or_default();
            let complete = suite.len() >= 2 * n;
            let mut row = RequirementDetection { index: i, complete, wrong: pool.len(), missed: 0, inconclusive: 0 };
            if complete {
                let suite = &suite[..2 * n];
                for w in pool {
                    match detect(model, reqs, i, suite, w, budget)? {
                        Detection::Missed => row.missed += 1,
                        Detection::Inconclusive => row.inconclusive += 1,
                        Detection::Detected { .. } => {}
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(DetectionReport::aggregate(n, rows))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dedup {
    /// One representative per class not equivalent to the oracle.
    pub kept: Vec<WrongSpec>,
    /// Candidates equivalent to the oracle within the scopes.
    pub equivalent_to_oracle: Vec<WrongSpec>,
    /// Candidates folded into an earlier representative, with its name.
    pub merged: Vec<(WrongSpec, Ident)>,
}

/// Whether some instance within `scopes` satisfying `assumptions`
/// distinguishes `f` from `g`. Budget exhaustion counts as distinguishable.
fn distinguishable(
    model: &Model,
    assumptions: &[Formula],
    f: &Formula,
    g: &Formula,
    cmd: &RunCommand,
    budget: &Budget,
) -> Result<bool, PipelineError> {
    let differ = Formula::not(Formula::logic(Logic::Iff, f.clone(), g.clone()));
    let mut extra = assumptions.to_vec();
    extra.push(differ);
    Ok(!matches!(solve(model, &extra, cmd, budget)?.outcome, Outcome::Unsat))
}

/// Group candidates for requirement `i` by bounded equivalence, assuming
/// the previous requirements hold.
pub fn dedupe_wrong_specs(
    model: &Model,
    reqs: &[Requirement],
    i: usize,
    candidates: Vec<WrongSpec>,
    scopes: &BTreeMap<Ident, Scope>,
    budget: &Budget,
) -> Result<Dedup, PipelineError> {
    let assumptions = oracles(model, reqs, i)?;
    let oracle = oracles(model, reqs, i + 1)?.pop().expect("requirement exists");
    let cmd = RunCommand {
        name: String::new(),
        body: Formula::new(FormulaKind::Block(Vec::new())),
        scopes: scopes.clone(),
        default_bound: None,
        expect: None,
        comment: None,
        span: Default::default(),
    };
    let mut out = Dedup { kept: Vec::new(), equivalent_to_oracle: Vec::new(), merged: Vec::new() };
    'next: for c in candidates {
        if !distinguishable(model, &assumptions, &c.formula, &oracle, &cmd, budget)? {
            out.equivalent_to_oracle.push(c);
            continue;
        }
        for k in &out.kept {
            if !distinguishable(model, &assumptions, &c.formula, &k.formula, &cmd, budget)? {
                let name = k.name.clone();
                out.merged.push((c, name));
                continue 'next;
            }
        }
        out.kept.push(c);
    }
    Ok(out)
}
