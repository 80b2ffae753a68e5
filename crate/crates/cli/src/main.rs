use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use alloytest_core::solver::Budget;
use alloytest_harness::report::Format;
use alloytest_llm::PromptVariant;
use clap::{Args, Parser, Subcommand};

mod check;
mod experiment;

#[derive(Parser)]
#[command(name = "alloytest", version, about = "Validate LLM-generated Alloy test suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model file and every command in it.
    Parse { path: PathBuf },
    /// Run the commands of a model file and check their expectations.
    Run {
        path: PathBuf,
        /// Only run the command with this name.
        name: Option<String>,
        /// Print the witness instance of satisfiable commands as JSON.
        #[arg(long)]
        witness: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Classify a generated suite through the validation funnel.
    Validate(ValidateArgs),
    /// Measure how many wrong specifications the valid tests detect.
    Detect(DetectArgs),
    /// Ask a chat provider for test suites and store them in the corpus.
    Generate(GenerateArgs),
}

#[derive(Args, Clone)]
pub struct SolverArgs {
    /// Wall-clock budget per solver call.
    #[arg(long, default_value_t = 10_000)]
    budget_ms: u64,
    /// Candidate budget per solver call.
    #[arg(long, default_value_t = 10_000_000)]
    budget_candidates: u64,
}

impl SolverArgs {
    pub fn budget(&self) -> Budget {
        Budget { max_candidates: self.budget_candidates, max_time: Duration::from_millis(self.budget_ms) }
    }
}

#[derive(Args, Clone)]
pub struct CorpusArgs {
    /// An example directory, or a directory of examples.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    run_id: String,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Report formats written besides JSON, and the one printed.
    #[arg(long, value_delimiter = ',', default_value = "md")]
    format: Vec<Format>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    common: CorpusArgs,
    /// Tests requested per polarity; missing tests count as failures.
    #[arg(long)]
    n: Option<usize>,
    /// Repair empty-relation arity mistakes before classifying.
    #[arg(long)]
    repair: bool,
    /// Also report whether satisfiable tests have a unique instance.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
pub struct DetectArgs {
    #[command(flatten)]
    common: CorpusArgs,
    /// Suite half-sizes to evaluate; defaults to every size some suite supports.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    repair: bool,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    common: CorpusArgs,
    #[arg(long, default_value = "few")]
    prompt: PromptVariant,
    /// Tests per polarity.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// A provider of the providers file, `mock:<response-file>` or `replay:<records-dir>`.
    #[arg(long)]
    provider: String,
    /// Provider configuration; defaults to `providers.toml` in the corpus.
    #[arg(long)]
    providers: Option<PathBuf>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Repair the extracted tests before writing the suite.
    #[arg(long)]
    repair: bool,
    /// Continue a run, reusing stored generation records.
    #[arg(long)]
    resume: bool,
}

/// Exit status: 0 success, 1 semantic mismatch, 2 usage or I/O error.
pub enum Status {
    Ok,
    Mismatch,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Parse { path } => check::parse(&path),
        Command::Run { path, name, witness, solver } => check::run(&path, name.as_deref(), witness, &solver.budget()),
        Command::Validate(a) => experiment::with_jobs(a.common.jobs, || experiment::validate(&a)),
        Command::Detect(a) => experiment::with_jobs(a.common.jobs, || experiment::detect(&a)),
        Command::Generate(a) => experiment::with_jobs(a.common.jobs, || experiment::generate(&a)),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Mismatch) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
