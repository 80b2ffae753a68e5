//! System prompt variants and the user prompt template.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptVariant {
    ZeroShot,
    OneShot,
    FewShot,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 3] = [PromptVariant::ZeroShot, PromptVariant::OneShot, PromptVariant::FewShot];

    pub fn name(self) -> &'static str {
        match self {
            PromptVariant::ZeroShot => "zero-shot",
            PromptVariant::OneShot => "one-shot",
            PromptVariant::FewShot => "few-shot",
        }
    }

    pub fn system_text(self) -> &'static str {
        match self {
            PromptVariant::ZeroShot => include_str!("../templates/zero_shot.txt"),
            PromptVariant::OneShot => include_str!("../templates/one_shot.txt"),
            PromptVariant::FewShot => include_str!("../templates/few_shot.txt"),
        }
    }

    /// SHA-256 of the system text, recorded in reports.
    pub fn hash(self) -> String {
        sha256(self.system_text())
    }
}

impl std::fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<PromptVariant, String> {
        PromptVariant::ALL
            .into_iter()
            .find(|v| v.name() == s || v.name().replace('-', "_") == s || v.name().strip_suffix("-shot") == Some(s))
            .ok_or_else(|| format!("unknown prompt variant `{s}` (expected zero-shot, one-shot or few-shot)"))
    }
}

pub fn sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Decoding parameters, forwarded when the provider accepts them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub model_source: String,
    /// Requirement texts in order.
    pub requirements: Vec<String>,
    pub index: usize,
    /// Tests per polarity.
    pub n: usize,
    pub provider: String,
    #[serde(default)]
    pub params: DecodingParams,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JobError {
    #[error("N must be at least 1")]
    ZeroN,
    #[error("requirement {index} does not exist ({count} requirements)")]
    NoRequirement { index: usize, count: usize },
}

impl GenerationJob {
    pub fn validate(&self) -> Result<(), JobError> {
        if self.n == 0 {
            return Err(JobError::ZeroN);
        }
        if self.index >= self.requirements.len() {
            return Err(JobError::NoRequirement { index: self.index, count: self.requirements.len() });
        }
        Ok(())
    }
}

fn quoted(r: &str) -> String {
    format!("\"{r}\"")
}

/// The user prompt: the request, the previous requirements and the model.
pub fn build_user_prompt(job: &GenerationJob) -> Result<String, JobError> {
    job.validate()?;
    let (n, i) = (job.n, job.index);
    let mut out = format!(
        "Generate {n} positive and {n} negative instances for the requirement {} for the following model.",
        quoted(&job.requirements[i])
    );
    let prev: Vec<String> = job.requirements[..i].iter().map(|r| quoted(r)).collect();
    match prev.as_slice() {
        [] => {}
        [one] => out += &format!(" All instances must also satisfy the requirement {one}."),
        [init @ .., last] => {
            out += &format!(" All instances must also satisfy the requirements {}, and {last}.", init.join(", "))
        }
    }
    out += "\n\n";
    out += job.model_source.trim_end();
    out.push('\n');
    Ok(out)
}
