mod common;

use alloytest_harness::pipeline::{validate_suite, Stage, StageResult, ValidateOptions};
use alloytest_harness::report::*;
use common::courses;
use proptest::prelude::*;

fn counts(tests: usize, syntax: usize, consistent: usize, previous: usize, valid: usize) -> Counts {
    Counts { tests, syntax, consistent, previous, valid, inconclusive: 0 }
}

/// The few-shot totals of the published results table.
fn few_shot() -> SuiteReport {
    SuiteReport::from_rows(vec![RequirementRow { index: 0, counts: counts(258, 255, 255, 252, 247) }])
}

#[test]
fn markdown_follows_the_table_layout() {
    let md = emit_report(&few_shot(), Format::Markdown);
    let lines: Vec<&str> = md.lines().collect();
    assert_eq!(lines[0], "| Requirement | Tests | Syntax | Consistent | Previous | Valid | % | Cost | Inconclusive |");
    assert_eq!(lines[3], "| total | 258 | 255 | 255 | 252 | 247 | 96% |  | 0 |");
}

#[test]
fn empty_report_is_header_only_csv() {
    let csv = emit_report(&SuiteReport::default(), Format::Csv);
    assert_eq!(csv, "Requirement,Tests,Syntax,Consistent,Previous,Valid,%,Cost,Inconclusive\n");
}

#[test]
fn csv_rows() {
    let mut r = few_shot();
    r.cost = Some(Cost { price: Some(1.5), ..Cost::default() });
    let csv = emit_report(&r, Format::Csv);
    assert_eq!(csv.lines().nth(2), Some("total,258,255,255,252,247,95.7,1.50,0"));
}

#[test]
fn json_round_trips() {
    let mut r = few_shot();
    r.cost = Some(Cost { input_tokens: 10, output_tokens: 20, reasoning_tokens: 5, price: None });
    r.syntax_before_repair = Some(200);
    r.meta.insert("version".into(), "0.1.0".into());
    assert_eq!(parse_json_report(&emit_report(&r, Format::Json)).unwrap(), r);
    let empty = SuiteReport::default();
    assert_eq!(parse_json_report(&emit_report(&empty, Format::Json)).unwrap(), empty);
}

#[test]
fn format_names() {
    assert_eq!("md".parse::<Format>(), Ok(Format::Markdown));
    assert_eq!("csv".parse::<Format>().map(Format::extension), Ok("csv"));
    assert!("xml".parse::<Format>().is_err());
}

fn stage_result(stage: Stage) -> StageResult {
    let passed = match stage {
        Stage::SyntaxFail => 0,
        Stage::Inconsistent => 1,
        Stage::PreviousFail => 2,
        Stage::OracleFail => 3,
        Stage::Valid => 4,
        Stage::Inconclusive => 2,
    };
    StageResult { stage, passed, detail: String::new(), witness: None, command: None, unique: None }
}

const STAGES: [Stage; 6] =
    [Stage::SyntaxFail, Stage::Inconsistent, Stage::PreviousFail, Stage::OracleFail, Stage::Valid, Stage::Inconclusive];

proptest! {
    #[test]
    fn counts_are_monotone_for_any_outcomes(stages in prop::collection::vec(0usize..6, 0..200)) {
        let mut c = Counts::default();
        for s in &stages {
            c.add(&stage_result(STAGES[*s]));
        }
        prop_assert!(c.is_monotone());
        prop_assert_eq!(c.tests, stages.len());
        prop_assert_eq!(c.valid, stages.iter().filter(|s| **s == 4).count());
        prop_assert!((0.0..=100.0).contains(&c.percent()));
    }
}

/// Fragments recombined into random test commands for the courses model.
const BODIES: [&str; 8] = [
    "some Student",
    "no Person",
    "some p : Person - Student | some p.enrolled",
    "some Professor & Student",
    "some teaches and no Professor",
    "enrolled = none",
    "teaches = none",
    "some c : Course | no teaches.c",
];
const SCOPES: [&str; 4] = ["", " for 2", " for 0 Person", " for 1 but 0 Course"];
const EXPECTS: [&str; 3] = ["", " expect 1", " expect 0"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn validated_suites_are_monotone(
        tests in prop::collection::vec((0usize..4, 0usize..8, 0usize..4, 0usize..3), 0..12)
    ) {
        let ex = courses();
        let suite: Vec<_> = tests
            .iter()
            .map(|(i, b, s, e)| {
                alloytest_harness::TestCase::new(*i, format!("run {{ {} }}{}{}", BODIES[*b], SCOPES[*s], EXPECTS[*e]))
            })
            .collect();
        let (report, results) = validate_suite(&ex.model, &ex.requirements, &suite, &ValidateOptions::default()).unwrap();
        prop_assert!(report.totals.is_monotone());
        prop_assert_eq!(report.totals.tests, suite.len());
        for r in &report.rows {
            prop_assert!(r.counts.is_monotone());
        }
        for (t, r) in tests.iter().zip(&results) {
            if t.0 == 0 && r.stage != Stage::SyntaxFail && r.stage != Stage::Inconsistent {
                prop_assert!(r.passed >= 3, "requirement 0 skips the previous check");
            }
        }
    }
}

#[test]
fn detection_table() {
    use alloytest_harness::mutation::{DetectionReport, RequirementDetection};
    let row = RequirementDetection { index: 0, complete: true, wrong: 3, missed: 1, inconclusive: 0 };
    let r = DetectionReport::aggregate(2, vec![row]);
    let md = emit_detection(std::slice::from_ref(&r), Format::Markdown);
    assert_eq!(md.lines().nth(2), Some("| 2 | 1 | 3 | 1 | 33.33% | 0 |"));
    let csv = emit_detection(&[], Format::Csv);
    assert_eq!(csv, "N,Complete,Wrong,Missed,Mean %,Inconclusive\n");
    let back: Vec<DetectionReport> = serde_json::from_str(&emit_detection(std::slice::from_ref(&r), Format::Json)).unwrap();
    assert_eq!(back, vec![r]);
}
