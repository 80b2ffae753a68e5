//! Funnel counts and their JSON, CSV and markdown renderings.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::mutation::DetectionReport;
use crate::pipeline::{Stage, StageResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tests: usize,
    pub syntax: usize,
    pub consistent: usize,
    pub previous: usize,
    pub valid: usize,
    pub inconclusive: usize,
}

impl Counts {
    pub fn add(&mut self, r: &StageResult) {
        self.tests += 1;
        self.syntax += (r.passed >= 1) as usize;
        self.consistent += (r.passed >= 2) as usize;
        self.previous += (r.passed >= 3) as usize;
        self.valid += (r.stage == Stage::Valid) as usize;
        self.inconclusive += (r.stage == Stage::Inconclusive) as usize;
    }

    pub fn merge(&mut self, o: &Counts) {
        self.tests += o.tests;
        self.syntax += o.syntax;
        self.consistent += o.consistent;
        self.previous += o.previous;
        self.valid += o.valid;
        self.inconclusive += o.inconclusive;
    }

    /// Valid tests as a percentage of all tests.
    pub fn percent(&self) -> f64 {
        if self.tests == 0 {
            0.0
        } else {
            100.0 * self.valid as f64 / self.tests as f64
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.tests >= self.syntax
            && self.syntax >= self.consistent
            && self.consistent >= self.previous
            && self.previous >= self.valid
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementRow {
    pub index: usize,
    pub counts: Counts,
}

/// Token usage and price echoed from the provider.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Cost {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub reasoning_tokens: u64,
    pub price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<RequirementRow>,
    pub totals: Counts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<Cost>,
    /// Syntax count before syntax repair, when repair was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub syntax_before_repair: Option<usize>,
    /// Tool version, solver budget, prompt hashes and similar.
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl SuiteReport {
    pub fn from_rows(rows: Vec<RequirementRow>) -> SuiteReport {
        let mut totals = Counts::default();
        for r in &rows {
            totals.merge(&r.counts);
        }
        SuiteReport { rows, totals, ..SuiteReport::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Format, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Markdown),
            _ => Err(format!("unknown report format `{s}`")),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Markdown => "md",
        }
    }
}

pub const COLUMNS: [&str; 9] =
    ["Requirement", "Tests", "Syntax", "Consistent", "Previous", "Valid", "%", "Cost", "Inconclusive"];

fn cost_cell(c: &Option<Cost>) -> String {
    match c {
        Some(Cost { price: Some(p), .. }) => format!("{p:.2}"),
        _ => String::new(),
    }
}

fn cells(label: &str, c: &Counts, cost: String) -> Vec<String> {
    vec![
        label.to_string(),
        c.tests.to_string(),
        c.syntax.to_string(),
        c.consistent.to_string(),
        c.previous.to_string(),
        c.valid.to_string(),
        format!("{:.1}", c.percent()),
        cost,
        c.inconclusive.to_string(),
    ]
}

fn table(report: &SuiteReport) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> =
        report.rows.iter().map(|r| cells(&r.index.to_string(), &r.counts, String::new())).collect();
    if !report.rows.is_empty() {
        out.push(cells("total", &report.totals, cost_cell(&report.cost)));
    }
    out
}

pub fn emit_report(report: &SuiteReport, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("report serializes"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS).expect("in-memory write");
            for row in table(report) {
                w.write_record(&row).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
        }
        Format::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "| {} |", COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(COLUMNS.len()));
            for mut row in table(report) {
                row[6] = format!("{:.0}%", row[6].parse::<f64>().unwrap_or(0.0));
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
            out
        }
    }
}

pub fn parse_json_report(text: &str) -> Result<SuiteReport, serde_json::Error> {
    serde_json::from_str(text)
}

pub const DETECTION_COLUMNS: [&str; 6] = ["N", "Complete", "Wrong", "Missed", "Mean %", "Inconclusive"];

/// One row per suite size.
pub fn emit_detection(reports: &[DetectionReport], format: Format) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.complete.to_string(),
                r.wrong.to_string(),
                r.missed.to_string(),
                format!("{:.2}", r.mean_percent),
                r.inconclusive.to_string(),
            ]
        })
        .collect();
    match format {
        Format::Json => serde_json::to_string_pretty(reports).expect("report serializes"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(DETECTION_COLUMNS).expect("in-memory write");
            for row in rows {
                w.write_record(&row).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
        }
        Format::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "| {} |", DETECTION_COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(DETECTION_COLUMNS.len()));
            for mut row in rows {
                row[4] += "%";
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
            out
        }
    }
}
