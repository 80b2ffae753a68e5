//! Classification of test cases through the validation funnel.

use alloytest_core::solver::{distinct_witness, solve, Budget, Outcome, SolveError};
use alloytest_core::semantics::Instance;
use alloytest_core::{parse_command, Expect, Formula, Model, Requirement, RunCommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{Counts, RequirementRow, SuiteReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn expect(self) -> Expect {
        match self {
            Polarity::Positive => Expect::Sat,
            Polarity::Negative => Expect::Unsat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub requirement: usize,
    /// Polarity declared by whoever wrote the test, if known.
    pub polarity: Option<Polarity>,
    pub raw: String,
    pub comment: Option<String>,
}

impl TestCase {
    pub fn new(requirement: usize, raw: impl Into<String>) -> TestCase {
        TestCase { requirement, polarity: None, raw: raw.into(), comment: None }
    }
}

/// Where a test left the funnel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    SyntaxFail,
    Inconsistent,
    PreviousFail,
    OracleFail,
    Valid,
    /// The solver budget ran out.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageResult {
    pub stage: Stage,
    /// Number of funnel metrics passed: Syntax, Consistent, Previous, Valid.
    pub passed: usize,
    pub detail: String,
    pub witness: Option<Instance>,
    pub command: Option<RunCommand>,
    /// With strict checking, whether a satisfiable test pins down a single
    /// instance up to isomorphism.
    pub unique: Option<bool>,
}

impl StageResult {
    fn new(stage: Stage, passed: usize, detail: impl Into<String>) -> StageResult {
        StageResult { stage, passed, detail: detail.into(), witness: None, command: None, unique: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error("requirement {0} does not exist")]
    NoRequirement(usize),
    #[error("oracle predicate `{0}` is not declared in the model")]
    MissingOracle(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassifyOptions {
    pub budget: Budget,
    /// Also ask for a second, non-isomorphic witness of satisfiable tests.
    pub strict: bool,
}

/// The oracle predicates of requirements `0..n` as formulas.
pub fn oracles(model: &Model, reqs: &[Requirement], n: usize) -> Result<Vec<Formula>, PipelineError> {
    reqs[..n]
        .iter()
        .map(|r| match model.pred(&r.oracle) {
            Some(p) if p.params.is_empty() => Ok(Formula::call(r.oracle.clone())),
            _ => Err(PipelineError::MissingOracle(r.oracle.clone())),
        })
        .collect()
}

pub fn classify_test(
    model: &Model,
    reqs: &[Requirement],
    t: &TestCase,
    opts: &ClassifyOptions,
) -> Result<StageResult, PipelineError> {
    let i = t.requirement;
    if i >= reqs.len() {
        return Err(PipelineError::NoRequirement(i));
    }
    let all = oracles(model, reqs, i + 1)?;
    let cmd = match parse_command(model, &t.raw) {
        Ok(c) => c,
        Err(e) => return Ok(StageResult::new(Stage::SyntaxFail, 0, e.to_string())),
    };
    let with = |mut r: StageResult, witness: Option<Instance>| {
        r.witness = witness;
        r.command = Some(cmd.clone());
        r
    };
    let run = |extra: &[Formula]| solve(model, extra, &cmd, &opts.budget).map(|r| r.outcome);

    match run(&[])? {
        Outcome::Unsat => return Ok(with(StageResult::new(Stage::Inconsistent, 1, "no instance within scope"), None)),
        Outcome::Inconclusive(why) => return Ok(with(StageResult::new(Stage::Inconclusive, 1, why), None)),
        Outcome::Sat(_) => {}
    }
    if i > 0 {
        match run(&all[..i])? {
            Outcome::Unsat => {
                let r = StageResult::new(Stage::PreviousFail, 2, "no instance satisfies the previous requirements");
                return Ok(with(r, None));
            }
            Outcome::Inconclusive(why) => return Ok(with(StageResult::new(Stage::Inconclusive, 2, why), None)),
            Outcome::Sat(_) => {}
        }
    }
    let (sat, witness) = match run(&all)? {
        Outcome::Sat(w) => (true, Some(w)),
        Outcome::Unsat => (false, None),
        Outcome::Inconclusive(why) => return Ok(with(StageResult::new(Stage::Inconclusive, 3, why), None)),
    };
    let Some(expect) = cmd.expect else {
        return Ok(with(StageResult::new(Stage::OracleFail, 3, "command has no expect clause"), witness));
    };
    if let Some(p) = t.polarity {
        if p.expect() != expect {
            let r = StageResult::new(Stage::OracleFail, 3, format!("declared {p:?} but expects {}", expect.digit()));
            return Ok(with(r, witness));
        }
    }
    let outcome = if sat { "satisfiable" } else { "unsatisfiable" };
    let mut r = if sat == (expect == Expect::Sat) {
        StageResult::new(Stage::Valid, 4, format!("{outcome} under the oracle, as expected"))
    } else {
        StageResult::new(Stage::OracleFail, 3, format!("{outcome} under the oracle, expected {}", expect.digit()))
    };
    if opts.strict {
        if let Some(w) = &witness {
            r.unique = match distinct_witness(model, &all, &cmd, w, &opts.budget)?.outcome {
                Outcome::Unsat => Some(true),
                Outcome::Sat(_) => Some(false),
                Outcome::Inconclusive(_) => None,
            };
        }
    }
    Ok(with(r, witness))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ValidateOptions {
    pub classify: ClassifyOptions,
    /// Number of tests requested per requirement; missing tests count
    /// towards Tests and fail every later stage.
    pub requested_per_requirement: Option<usize>,
}

/// Classify every test of a suite and aggregate the funnel per requirement.
pub fn validate_suite(
    model: &Model,
    reqs: &[Requirement],
    suite: &[TestCase],
    opts: &ValidateOptions,
) -> Result<(SuiteReport, Vec<StageResult>), PipelineError> {
    let results: Vec<StageResult> = suite
        .par_iter()
        .map(|t| classify_test(model, reqs, t, &opts.classify))
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<RequirementRow> = Vec::new();
    for (t, r) in suite.iter().zip(&results) {
        let row = match rows.iter_mut().find(|row| row.index == t.requirement) {
            Some(row) => row,
            None => {
                rows.push(RequirementRow { index: t.requirement, counts: Counts::default() });
                rows.last_mut().unwrap()
            }
        };
        row.counts.add(r);
    }
    if let Some(n) = opts.requested_per_requirement {
        for req in reqs {
            if !rows.iter().any(|r| r.index == req.index) {
                rows.push(RequirementRow { index: req.index, counts: Counts::default() });
            }
        }
        for row in &mut rows {
            row.counts.tests = row.counts.tests.max(n);
        }
    }
    rows.sort_by_key(|r| r.index);
    Ok((SuiteReport::from_rows(rows), results))
}
