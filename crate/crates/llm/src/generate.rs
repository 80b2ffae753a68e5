//! Generation jobs and their persisted records.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use alloytest_core::{extract_commands, RawCommand};
use serde::{Deserialize, Serialize};

use crate::prompt::{build_user_prompt, GenerationJob, JobError, PromptVariant};
use crate::provider::{ChatProvider, ChatRequest, Pricing, ProviderError, ReplayProvider, Usage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedTest {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

impl ExtractedTest {
    pub fn with_comment(&self) -> String {
        RawCommand { text: self.text.clone(), comment: self.comment.clone() }.with_comment()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub job: GenerationJob,
    pub prompt: PromptVariant,
    pub system_hash: String,
    pub user_prompt: String,
    pub request_hash: String,
    pub raw_response: String,
    pub tests: Vec<ExtractedTest>,
    /// No command could be recovered from the response.
    pub flagged: bool,
    pub usage: Usage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    pub temperature_sent: bool,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub provider: String,
    pub provider_model: String,
}

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error(transparent)]
    Job(#[from] JobError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

pub fn extract_tests(raw: &str) -> Vec<ExtractedTest> {
    extract_commands(raw).into_iter().map(|c| ExtractedTest { text: c.text, comment: c.comment }).collect()
}

pub fn request_for(job: &GenerationJob, prompt: PromptVariant) -> Result<ChatRequest, JobError> {
    Ok(ChatRequest { system: prompt.system_text().to_string(), user: build_user_prompt(job)?, params: job.params.clone() })
}

pub fn generate(
    job: &GenerationJob,
    prompt: PromptVariant,
    provider: &dyn ChatProvider,
    pricing: Option<Pricing>,
) -> Result<GenerationRecord, GenerateError> {
    let req = request_for(job, prompt)?;
    let resp = provider.complete(&req)?;
    let tests = extract_tests(&resp.text);
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    Ok(GenerationRecord {
        job: job.clone(),
        prompt,
        system_hash: prompt.hash(),
        request_hash: req.hash(),
        user_prompt: req.user,
        flagged: tests.is_empty(),
        tests,
        raw_response: resp.text,
        cost: pricing.map(|p| p.cost(&resp.usage)),
        usage: resp.usage,
        temperature_sent: resp.temperature_sent,
        timestamp,
        provider: provider.id(),
        provider_model: resp.model,
    })
}

fn write_atomic(path: &Path, content: &str) -> Result<(), GenerateError> {
    let io = |e: std::io::Error| GenerateError::Io { path: path.to_path_buf(), message: e.to_string() };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, content).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Write `<stem>.response.txt` verbatim, then `<stem>.json`.
pub fn save_record(dir: &Path, stem: &str, record: &GenerationRecord) -> Result<PathBuf, GenerateError> {
    write_atomic(&dir.join(format!("{stem}.response.txt")), &record.raw_response)?;
    let path = dir.join(format!("{stem}.json"));
    write_atomic(&path, &serde_json::to_string_pretty(record).expect("record serializes"))?;
    Ok(path)
}

pub fn load_record(path: &Path) -> Result<GenerationRecord, GenerateError> {
    let err = |message: String| GenerateError::Io { path: path.to_path_buf(), message };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(e.to_string()))
}

/// Every `*.json` record in a directory, sorted by file name.
pub fn load_records(dir: &Path) -> Result<Vec<GenerationRecord>, GenerateError> {
    let err = |e: std::io::Error| GenerateError::Io { path: dir.to_path_buf(), message: e.to_string() };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_record(p)).collect()
}

impl ReplayProvider {
    pub fn from_records(records: &[GenerationRecord]) -> ReplayProvider {
        let mut r = ReplayProvider::default();
        for rec in records {
            r.insert(rec.request_hash.clone(), rec.raw_response.clone(), rec.usage, rec.provider_model.clone());
        }
        r
    }

    pub fn from_dir(dir: &Path) -> Result<ReplayProvider, GenerateError> {
        Ok(ReplayProvider::from_records(&load_records(dir)?))
    }
}
