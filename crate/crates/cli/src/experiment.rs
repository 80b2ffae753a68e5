//! `validate`, `detect` and `generate` over a corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use alloytest_core::{parse_command, RunCommand};
use alloytest_harness::corpus::{examples, write_atomic, Example};
use alloytest_harness::mutation::{detection_report, DetectionReport};
use alloytest_harness::pipeline::{validate_suite, ClassifyOptions, Stage, StageResult, TestCase, ValidateOptions};
use alloytest_harness::report::{emit_detection, emit_report, Cost, Format, SuiteReport};
use alloytest_llm::generate::{generate as generate_record, load_record, load_records, save_record};
use alloytest_llm::provider::{ChatProvider, HttpProvider, MockProvider, Pricing, ProvidersFile, ReplayProvider};
use alloytest_llm::{repair_syntax, DecodingParams, GenerationJob, GenerationRecord};
use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use crate::{CorpusArgs, DetectArgs, GenerateArgs, Status, ValidateArgs};

pub fn with_jobs(jobs: Option<usize>, f: impl FnOnce() -> Result<Status> + Send) -> Result<Status> {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?.install(f),
        None => f(),
    }
}

fn generations_dir(ex: &Example, run_id: &str) -> PathBuf {
    ex.dir.join("generations").join(run_id)
}

fn records(ex: &Example, run_id: &str) -> Result<Vec<GenerationRecord>> {
    let dir = generations_dir(ex, run_id);
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    Ok(load_records(&dir)?)
}

fn meta(c: &CorpusArgs, ex: &Example, records: &[GenerationRecord]) -> BTreeMap<String, String> {
    let mut m = BTreeMap::from([
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("example".to_string(), ex.name.clone()),
        ("run_id".to_string(), c.run_id.clone()),
        ("budget_ms".to_string(), c.solver.budget_ms.to_string()),
        ("budget_candidates".to_string(), c.solver.budget_candidates.to_string()),
    ]);
    let distinct = |f: &dyn Fn(&GenerationRecord) -> String| {
        records.iter().map(f).collect::<BTreeSet<_>>().into_iter().collect::<Vec<_>>().join(",")
    };
    if !records.is_empty() {
        m.insert("prompt".into(), distinct(&|r| r.prompt.name().to_string()));
        m.insert("prompt_hash".into(), distinct(&|r| r.system_hash.clone()));
        m.insert("provider".into(), distinct(&|r| r.provider.clone()));
        m.insert("provider_model".into(), distinct(&|r| r.provider_model.clone()));
        m.insert("n".into(), distinct(&|r| r.job.n.to_string()));
        m.insert(
            "temperature".into(),
            distinct(&|r| match (r.job.params.temperature, r.temperature_sent) {
                (Some(t), true) => t.to_string(),
                (Some(t), false) => format!("{t} (not sent)"),
                (None, _) => "default".into(),
            }),
        );
    }
    m
}

fn cost(records: &[GenerationRecord]) -> Option<Cost> {
    if records.is_empty() {
        return None;
    }
    let mut c = Cost::default();
    for r in records {
        c.input_tokens += r.usage.input_tokens;
        c.output_tokens += r.usage.output_tokens;
        c.reasoning_tokens += r.usage.reasoning_tokens;
    }
    if records.iter().all(|r| r.cost.is_some()) {
        c.price = Some(records.iter().filter_map(|r| r.cost).sum());
    }
    Some(c)
}

/// The suite of a run, repaired when asked. Also returns the number of
/// tests that parse before repair.
fn load_suite(ex: &Example, run_id: &str, repair: bool) -> Result<(Vec<TestCase>, usize)> {
    let dir = ex.suite_dir(run_id);
    if !dir.is_dir() {
        bail!("{}: no suites for run `{run_id}`", dir.display());
    }
    let mut suite = ex.suite(run_id)?;
    let parsed = suite.iter().filter(|t| parse_command(&ex.model, &t.raw).is_ok()).count();
    if repair {
        for t in &mut suite {
            let (fixed, edits) = repair_syntax(&ex.model, &t.raw);
            for e in &edits {
                eprintln!("{}: requirement {}: repaired {e}", ex.name, t.requirement);
            }
            t.raw = fixed;
        }
    }
    Ok((suite, parsed))
}

fn write_reports(c: &CorpusArgs, ex: &Example, stem: &str, json: &str, render: impl Fn(Format) -> String) -> Result<()> {
    write_atomic(&ex.report_path(stem, "json"), json)?;
    for f in &c.format {
        if *f != Format::Json {
            write_atomic(&ex.report_path(stem, f.extension()), &render(*f))?;
        }
    }
    println!("== {} ==", ex.name);
    print!("{}", render(c.format.first().copied().unwrap_or(Format::Markdown)));
    Ok(())
}

fn stage_json(t: &TestCase, r: &StageResult) -> serde_json::Value {
    json!({
        "requirement": t.requirement,
        "stage": r.stage,
        "passed": r.passed,
        "detail": r.detail,
        "unique": r.unique,
        "test": t.raw,
    })
}

fn classify(a_common: &CorpusArgs, ex: &Example, suite: &[TestCase], strict: bool, requested: Option<usize>) -> Result<(SuiteReport, Vec<StageResult>)> {
    let opts = ValidateOptions {
        classify: ClassifyOptions { budget: a_common.solver.budget(), strict },
        requested_per_requirement: requested,
    };
    Ok(validate_suite(&ex.model, &ex.requirements, suite, &opts)?)
}

pub fn validate(a: &ValidateArgs) -> Result<Status> {
    let c = &a.common;
    for ex in examples(&c.corpus)? {
        let recs = records(&ex, &c.run_id)?;
        let (suite, parsed) = load_suite(&ex, &c.run_id, a.repair)?;
        let n = a.n.or_else(|| recs.first().map(|r| r.job.n));
        let (mut report, results) = classify(c, &ex, &suite, a.strict, n.map(|n| 2 * n))?;
        if a.repair {
            report.syntax_before_repair = Some(parsed);
        }
        report.cost = cost(&recs);
        report.meta = meta(c, &ex, &recs);
        report.meta.insert("repair".into(), a.repair.to_string());
        report.meta.insert("strict".into(), a.strict.to_string());
        let tests: Vec<_> = suite.iter().zip(&results).map(|(t, r)| stage_json(t, r)).collect();
        write_atomic(&ex.report_path(&format!("{}.tests", c.run_id), "json"), &serde_json::to_string_pretty(&tests)?)?;
        write_reports(c, &ex, &c.run_id, &emit_report(&report, Format::Json), |f| emit_report(&report, f))?;
        if let Some(before) = report.syntax_before_repair {
            println!("syntax before repair: {before}, after: {}", report.totals.syntax);
        }
    }
    Ok(Status::Ok)
}

pub fn detect(a: &DetectArgs) -> Result<Status> {
    let c = &a.common;
    for ex in examples(&c.corpus)? {
        let (suite, _) = load_suite(&ex, &c.run_id, a.repair)?;
        let (_, results) = classify(c, &ex, &suite, false, None)?;
        let mut valid: BTreeMap<usize, Vec<RunCommand>> = BTreeMap::new();
        for (t, r) in suite.iter().zip(results) {
            if let (Stage::Valid, Some(cmd)) = (r.stage, r.command) {
                valid.entry(t.requirement).or_default().push(cmd);
            }
        }
        let wrongs = ex.wrong_specs()?;
        let ns = if a.n.is_empty() {
            let max = valid.values().map(|v| v.len() / 2).max().unwrap_or(0).max(1);
            (1..=max).collect()
        } else {
            a.n.clone()
        };
        if ns.contains(&0) {
            bail!("--n values must be at least 1");
        }
        let budget = c.solver.budget();
        let reports: Vec<DetectionReport> = ns
            .iter()
            .map(|&n| detection_report(&ex.model, &ex.requirements, &valid, &wrongs, n, &budget))
            .collect::<Result<_, _>>()?;
        let recs = records(&ex, &c.run_id)?;
        let doc = json!({ "meta": meta(c, &ex, &recs), "detection": reports });
        write_reports(c, &ex, &format!("{}.detect", c.run_id), &serde_json::to_string_pretty(&doc)?, |f| {
            emit_detection(&reports, f)
        })?;
    }
    Ok(Status::Ok)
}

fn provider(a: &GenerateArgs) -> Result<(Box<dyn ChatProvider>, Option<Pricing>)> {
    if let Some(file) = a.provider.strip_prefix("mock:") {
        let text = std::fs::read_to_string(file).with_context(|| format!("cannot read {file}"))?;
        return Ok((Box::new(MockProvider::new(text)), None));
    }
    if let Some(dir) = a.provider.strip_prefix("replay:") {
        return Ok((Box::new(ReplayProvider::from_dir(Path::new(dir))?), None));
    }
    let path = a.providers.clone().unwrap_or_else(|| a.common.corpus.join("providers.toml"));
    let mut file = ProvidersFile::load(&path)?;
    let config = file
        .providers
        .remove(&a.provider)
        .ok_or_else(|| anyhow!("provider `{}` is not configured in {}", a.provider, path.display()))?;
    let pricing = config.pricing;
    Ok((Box::new(HttpProvider::new(&a.provider, config)?), pricing))
}

pub fn generate(a: &GenerateArgs) -> Result<Status> {
    let c = &a.common;
    let (provider, pricing) = provider(a)?;
    let mut failures = Vec::new();
    for ex in examples(&c.corpus)? {
        if ex.suite_dir(&c.run_id).exists() && !a.resume {
            bail!("{}: run `{}` already exists; pass --resume to continue it", ex.suite_dir(&c.run_id).display(), c.run_id);
        }
        let gen_dir = generations_dir(&ex, &c.run_id);
        let texts: Vec<String> = ex.requirements.iter().map(|r| r.text.clone()).collect();
        let outcomes: Vec<Result<(usize, usize)>> = (0..texts.len())
            .into_par_iter()
            .map(|i| {
                let stored = gen_dir.join(format!("{i}.json"));
                let rec = if a.resume && stored.is_file() {
                    load_record(&stored)?
                } else {
                    let job = GenerationJob {
                        model_source: ex.source.clone(),
                        requirements: texts.clone(),
                        index: i,
                        n: a.n as usize,
                        provider: a.provider.clone(),
                        params: DecodingParams { temperature: a.temperature, max_tokens: None },
                    };
                    let rec = generate_record(&job, a.prompt, provider.as_ref(), pricing)?;
                    save_record(&gen_dir, &i.to_string(), &rec)?;
                    rec
                };
                let tests: Vec<String> = rec
                    .tests
                    .iter()
                    .map(|t| {
                        let raw = t.with_comment();
                        if a.repair { repair_syntax(&ex.model, &raw).0 } else { raw }
                    })
                    .collect();
                ex.write_suite(&c.run_id, i, &(tests.join("\n\n") + "\n"))?;
                Ok((i, rec.tests.len()))
            })
            .collect();
        println!("== {} ==", ex.name);
        let mut extracted = 0;
        for (i, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok((_, k)) => {
                    extracted += k;
                    println!("requirement {i}: {k} tests");
                }
                Err(e) => {
                    eprintln!("{}: requirement {i}: {e:#}", ex.name);
                    failures.push(format!("{}:{i}", ex.name));
                }
            }
        }
        println!("requested {} tests, extracted {extracted}", 2 * a.n as usize * texts.len());
    }
    if !failures.is_empty() {
        bail!("generation failed for {} requirements ({}); completed ones are stored", failures.len(), failures.join(", "));
    }
    Ok(Status::Ok)
}
