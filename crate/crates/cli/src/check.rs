//! `parse` and `run`.

use std::path::Path;

use alloytest_core::solver::{solve, Budget, Outcome};
use alloytest_core::{parse_model, Expect};
use anyhow::{bail, Context, Result};

use crate::Status;

pub fn parse(path: &Path) -> Result<Status> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    match parse_model(&text) {
        Ok(m) => {
            eprintln!("{}: {} signatures, {} commands", path.display(), m.sigs.len(), m.commands.len());
            Ok(Status::Ok)
        }
        Err(e) => {
            eprintln!("{}:{}: {} error: {}", path.display(), e.span, e.kind, e.message);
            Ok(Status::Mismatch)
        }
    }
}

pub fn run(path: &Path, name: Option<&str>, witness: bool, budget: &Budget) -> Result<Status> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let model = match parse_model(&text) {
        Ok(m) => m,
        Err(e) => bail!("{}:{}: {} error: {}", path.display(), e.span, e.kind, e.message),
    };
    let cmds: Vec<_> = model.commands.iter().filter(|c| name.is_none_or(|n| c.name == n)).collect();
    if cmds.is_empty() {
        match name {
            Some(n) => bail!("no command named `{n}` in {}", path.display()),
            None => bail!("no commands in {}", path.display()),
        }
    }
    let mut status = Status::Ok;
    for (k, cmd) in cmds.into_iter().enumerate() {
        let label = if cmd.name.is_empty() { format!("run#{}", k + 1) } else { cmd.name.clone() };
        let r = solve(&model, &[], cmd, budget)?;
        let (word, sat) = match &r.outcome {
            Outcome::Sat(_) => ("SAT", Some(true)),
            Outcome::Unsat => ("UNSAT", Some(false)),
            Outcome::Inconclusive(_) => ("INCONCLUSIVE", None),
        };
        let verdict = match (cmd.expect, sat) {
            (None, _) => String::new(),
            (Some(_), None) => {
                status = Status::Mismatch;
                " (budget exhausted)".into()
            }
            (Some(e), Some(s)) if s == (e == Expect::Sat) => " (expected)".into(),
            (Some(_), Some(_)) => {
                status = Status::Mismatch;
                " (UNEXPECTED)".into()
            }
        };
        println!("{label}: {word}{verdict}");
        if let (true, Outcome::Sat(inst)) = (witness, &r.outcome) {
            println!("{}", serde_json::to_string_pretty(&inst.to_json())?);
        }
    }
    Ok(status)
}
