//! Validation funnel for generated test suites and detection of wrong
//! specifications.

pub mod corpus;
pub mod mutation;
pub mod pipeline;
pub mod report;

pub use mutation::{dedupe_wrong_specs, detect, detection_report, Detection, DetectionReport, WrongSpec};
pub use pipeline::{classify_test, validate_suite, ClassifyOptions, Polarity, Stage, StageResult, TestCase, ValidateOptions};
pub use report::{emit_report, Counts, Format, SuiteReport};
