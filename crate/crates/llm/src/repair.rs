//! Repair of empty-relation arity mistakes in generated commands.

use std::collections::BTreeMap;

use alloytest_core::lexer::{tokenize, Tok, Token};
use alloytest_core::typeck::arity_of;
use alloytest_core::{parse_command, parse_expr_syntax, Model};

fn ident(t: Option<&Token>) -> Option<&str> {
    match t.map(|t| &t.tok) {
        Some(Tok::Ident(s)) => Some(s),
        _ => None,
    }
}

fn sym(t: Option<&Token>, s: &str) -> bool {
    matches!(t.map(|t| &t.tok), Some(Tok::Sym(x)) if *x == s)
}

/// Token range of the relation on the left of the `=` at `k`: `F` or
/// `S <: F`, standing at the start of a conjunct.
fn lhs(toks: &[Token], k: usize) -> Option<usize> {
    let start = if k >= 3 && sym(toks.get(k - 2), "<:") && ident(toks.get(k - 3)).is_some() {
        k - 3
    } else if k >= 1 {
        k - 1
    } else {
        return None;
    };
    ident(toks.get(k - 1))?;
    let first = &toks[start];
    let boundary = first.line_start
        || start == 0
        || ["{", "|", "("].iter().any(|s| sym(toks.get(start - 1), s))
        || ident(toks.get(start - 1)) == Some("and");
    boundary.then_some(start)
}

/// Token range end (exclusive) of a `none` or `no F` right side at `k + 1`.
fn rhs(toks: &[Token], k: usize) -> Option<usize> {
    let end = match ident(toks.get(k + 1)) {
        Some("none") => k + 2,
        Some("no") => {
            ident(toks.get(k + 2))?;
            if sym(toks.get(k + 3), "<:") && ident(toks.get(k + 4)).is_some() {
                k + 5
            } else {
                k + 3
            }
        }
        _ => return None,
    };
    let continues = ["->", ".", "<:", ":>", "[", "+", "&", "-"].iter().any(|s| sym(toks.get(end), s));
    (!continues).then_some(end)
}

/// Rewrite `F = none` and `F = no F`, where `F` has arity k ≥ 2, to
/// `F = none->...->none` with k factors. Commands that already parse, and
/// commands that still fail after the rewrite, are returned unchanged.
pub fn repair_syntax(model: &Model, raw: &str) -> (String, Vec<String>) {
    let unchanged = || (raw.to_string(), Vec::new());
    if parse_command(model, raw).is_ok() {
        return unchanged();
    }
    let Ok(toks) = tokenize(raw) else { return unchanged() };
    let mut edits = Vec::new();
    for k in 0..toks.len() {
        if !sym(toks.get(k), "=") {
            continue;
        }
        let (Some(l), Some(r)) = (lhs(&toks, k), rhs(&toks, k)) else { continue };
        let left = &raw[toks[l].span.start..toks[k - 1].span.end];
        let Ok(e) = parse_expr_syntax(left) else { continue };
        let arity = match arity_of(model, &BTreeMap::new(), &e) {
            Ok(a) if a >= 2 => a,
            _ => continue,
        };
        let span = toks[k + 1].span.start..toks[r - 1].span.end;
        let replacement = vec!["none"; arity].join("->");
        let desc = format!(
            "line {}: `{left} = {}` -> `{left} = {replacement}`",
            toks[k].span.start_line,
            &raw[span.clone()]
        );
        edits.push((span, replacement, desc));
    }
    if edits.is_empty() {
        return unchanged();
    }
    let mut out = raw.to_string();
    for (span, rep, _) in edits.iter().rev() {
        out.replace_range(span.clone(), rep);
    }
    if parse_command(model, &out).is_err() {
        return unchanged();
    }
    (out, edits.into_iter().map(|e| e.2).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloytest_core::parse_model;

    const MODEL: &str = "open util/ordering[Grade]
sig Person { teaches : set Course }
sig Course { grades : Person -> Grade }
sig Grade {}";

    fn run(body: &str) -> String {
        format!("run {{ {body} }} for 2 expect 1")
    }

    #[test]
    fn binary_and_ternary() {
        let m = parse_model(MODEL).unwrap();
        let (out, edits) = repair_syntax(&m, &run("teaches = none\n grades = no grades"));
        assert_eq!(out, run("teaches = none->none\n grades = none->none->none"));
        assert_eq!(edits.len(), 2);
        assert!(edits[0].contains("`teaches = none` -> `teaches = none->none`"), "{}", edits[0]);
    }

    #[test]
    fn ordering_relation() {
        let m = parse_model(MODEL).unwrap();
        let (out, _) = repair_syntax(&m, &run("Grade <: next = none"));
        assert_eq!(out, run("Grade <: next = none->none"));
    }

    #[test]
    fn joined_left_sides_are_left_alone() {
        let m = parse_model(MODEL).unwrap();
        let bad = run("some p : Person | p.teaches = none and teaches = none->none->none");
        assert_eq!(repair_syntax(&m, &bad), (bad.clone(), vec![]));
    }
}
