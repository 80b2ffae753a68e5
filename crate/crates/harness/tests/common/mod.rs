#![allow(dead_code)]

use std::path::PathBuf;

use alloytest_harness::corpus::Example;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/courses")
}

pub fn courses() -> Example {
    Example::load(&corpus_dir()).unwrap()
}

pub const POSITIVE: &str = include_str!("../../../core/tests/fixtures/positive.als");
pub const NEGATIVE: &str = include_str!("../../../core/tests/fixtures/negative.als");
