//! Reading and writing the on-disk corpus.
//!
//! ```text
//! <example>/model.als
//! <example>/requirements.yaml      - [{text, oracle}, ...]
//! <example>/suites/<run-id>/<i>.als
//! <example>/wrong_specs/<i>.als
//! <example>/reports/<run-id>.<ext>
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use alloytest_core::{extract_commands, parse_model, parse_predicates, Model, ParseError, Requirement};
use serde::Deserialize;

use crate::mutation::WrongSpec;
use crate::pipeline::TestCase;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {error}")]
    Parse { path: PathBuf, error: ParseError },
    #[error("{path}: {message}")]
    Yaml { path: PathBuf, message: String },
    #[error("corpus layout problems:\n  {}", .0.join("\n  "))]
    Layout(Vec<String>),
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

/// Write through a temporary file and rename, so readers never see a
/// partially written file.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, content).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

#[derive(Debug, Deserialize)]
struct RequirementEntry {
    text: String,
    oracle: String,
}

#[derive(Debug, Clone)]
pub struct Example {
    pub name: String,
    pub dir: PathBuf,
    pub source: String,
    pub model: Model,
    pub requirements: Vec<Requirement>,
}

/// Indexed `<i>.als` files of a directory. Other entries are layout problems.
fn indexed_files(dir: &Path, limit: usize, problems: &mut Vec<String>) -> Result<BTreeMap<usize, PathBuf>, CorpusError> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return Ok(out);
    }
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?;
    for e in entries {
        let path = e.map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?.path();
        let index = path
            .extension()
            .filter(|x| *x == "als")
            .and_then(|_| path.file_stem())
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<usize>().ok());
        match index {
            Some(i) if i < limit => {
                out.insert(i, path);
            }
            Some(i) => problems.push(format!("{}: requirement {i} does not exist", path.display())),
            None => problems.push(format!("{}: expected a file named <requirement-index>.als", path.display())),
        }
    }
    Ok(out)
}

impl Example {
    pub fn load(dir: &Path) -> Result<Example, CorpusError> {
        let model_path = dir.join("model.als");
        let req_path = dir.join("requirements.yaml");
        let mut problems = Vec::new();
        for p in [&model_path, &req_path] {
            if !p.is_file() {
                problems.push(format!("{}: missing", p.display()));
            }
        }
        if !problems.is_empty() {
            return Err(CorpusError::Layout(problems));
        }
        let source = read(&model_path)?;
        let model = parse_model(&source).map_err(|error| CorpusError::Parse { path: model_path.clone(), error })?;
        let entries: Vec<RequirementEntry> = serde_yaml::from_str(&read(&req_path)?)
            .map_err(|e| CorpusError::Yaml { path: req_path.clone(), message: e.to_string() })?;
        let requirements: Vec<Requirement> = entries
            .into_iter()
            .enumerate()
            .map(|(index, e)| Requirement { index, text: e.text, oracle: e.oracle })
            .collect();
        for r in &requirements {
            if !model.pred(&r.oracle).is_some_and(|p| p.params.is_empty()) {
                problems.push(format!(
                    "{}: oracle `{}` of requirement {} is not a parameterless predicate of the model",
                    req_path.display(),
                    r.oracle,
                    r.index
                ));
            }
        }
        if !problems.is_empty() {
            return Err(CorpusError::Layout(problems));
        }
        let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("example").to_string();
        Ok(Example { name, dir: dir.to_path_buf(), source, model, requirements })
    }

    pub fn suite_dir(&self, run_id: &str) -> PathBuf {
        self.dir.join("suites").join(run_id)
    }

    /// Tests of a generated suite, in requirement order.
    pub fn suite(&self, run_id: &str) -> Result<Vec<TestCase>, CorpusError> {
        let mut problems = Vec::new();
        let files = indexed_files(&self.suite_dir(run_id), self.requirements.len(), &mut problems)?;
        if !problems.is_empty() {
            return Err(CorpusError::Layout(problems));
        }
        let mut out = Vec::new();
        for (i, path) in files {
            for c in extract_commands(&read(&path)?) {
                out.push(TestCase { requirement: i, polarity: None, raw: c.with_comment(), comment: c.comment });
            }
        }
        Ok(out)
    }

    pub fn write_suite(&self, run_id: &str, i: usize, text: &str) -> Result<PathBuf, CorpusError> {
        let path = self.suite_dir(run_id).join(format!("{i}.als"));
        write_atomic(&path, text)?;
        Ok(path)
    }

    /// Wrong-specification pools, one predicate per candidate.
    pub fn wrong_specs(&self) -> Result<BTreeMap<usize, Vec<WrongSpec>>, CorpusError> {
        let mut problems = Vec::new();
        let files = indexed_files(&self.dir.join("wrong_specs"), self.requirements.len(), &mut problems)?;
        if !problems.is_empty() {
            return Err(CorpusError::Layout(problems));
        }
        let mut out = BTreeMap::new();
        for (i, path) in files {
            let preds = parse_predicates(&self.model, &read(&path)?)
                .map_err(|error| CorpusError::Parse { path: path.clone(), error })?;
            out.insert(i, preds.iter().map(|p| WrongSpec::from_pred(i, p)).collect());
        }
        Ok(out)
    }

    pub fn report_path(&self, name: &str, ext: &str) -> PathBuf {
        self.dir.join("reports").join(format!("{name}.{ext}"))
    }
}

/// The examples under `root`: `root` itself if it holds a `model.als`,
/// otherwise every subdirectory that does.
pub fn examples(root: &Path) -> Result<Vec<Example>, CorpusError> {
    if root.join("model.als").is_file() {
        return Ok(vec![Example::load(root)?]);
    }
    let entries = fs::read_dir(root).map_err(|source| CorpusError::Io { path: root.to_path_buf(), source })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("model.als").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CorpusError::Layout(vec![format!("{}: no example directories with a model.als", root.display())]));
    }
    dirs.iter().map(|d| Example::load(d)).collect()
}
