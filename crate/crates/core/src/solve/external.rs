//! Driving an external DIMACS solver through the usual `s` / `v` line
//! protocol.

use std::path::Path;
use std::process::Command;

use super::{SolveOutcome, SolveStats, SolveStatus};
use crate::cnf::CnfFormula;
use crate::error::{Error, Result};

/// Parses a solver transcript. `num_vars` sizes the model; variables the
/// solver leaves out of its `v` lines are reported false.
pub fn parse_solver_output(stdout: &str, num_vars: usize) -> Result<SolveOutcome> {
    let mut status = None;
    let mut values: Vec<i64> = Vec::new();
    let mut terminated = false;
    for line in stdout.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("s ") {
            let s = match rest.trim() {
                "SATISFIABLE" => SolveStatus::Sat,
                "UNSATISFIABLE" => SolveStatus::Unsat,
                "UNKNOWN" | "INDETERMINATE" => SolveStatus::Unknown,
                other => return Err(Error::Protocol(format!("unknown status `{other}`"))),
            };
            if status.replace(s).is_some_and(|prev| prev != s) {
                return Err(Error::Protocol("conflicting status lines".into()));
            }
        } else if let Some(rest) =
            line.strip_prefix("v ")
                .or(if line == "v" { Some("") } else { None })
        {
            for tok in rest.split_whitespace() {
                let v: i64 = tok
                    .parse()
                    .map_err(|_| Error::Protocol(format!("bad value `{tok}`")))?;
                if v == 0 {
                    terminated = true;
                } else if v.unsigned_abs() as usize > num_vars {
                    return Err(Error::Protocol(format!(
                        "value {v} beyond {num_vars} variables"
                    )));
                } else {
                    values.push(v);
                }
            }
        }
    }
    let status = status.ok_or_else(|| Error::Protocol("no `s` status line".into()))?;
    let model = match status {
        SolveStatus::Sat => {
            if !terminated {
                return Err(Error::Protocol("model not terminated by 0".into()));
            }
            let mut m = vec![false; num_vars];
            for v in values {
                m[v.unsigned_abs() as usize - 1] = v > 0;
            }
            Some(m)
        }
        _ => None,
    };
    Ok(SolveOutcome {
        status,
        model,
        stats: SolveStats::default(),
    })
}

/// Runs `solver_command` (program followed by its arguments) with the DIMACS
/// file appended as the last argument and parses its verdict.
///
/// Exit codes are ignored when a status line is present, since solvers
/// conventionally exit 10 / 20.
pub fn external_solve(dimacs_path: &Path, solver_command: &[String]) -> Result<SolveOutcome> {
    let (program, args) = solver_command
        .split_first()
        .ok_or_else(|| Error::InvalidInput("empty solver command".into()))?;
    let text = std::fs::read_to_string(dimacs_path)?;
    let num_vars = CnfFormula::from_dimacs(&text)?.num_vars as usize;
    let output = Command::new(program).args(args).arg(dimacs_path).output()?;
    let stdout = String::from_utf8_lossy(&output.stdout);
    match parse_solver_output(&stdout, num_vars) {
        Ok(outcome) => Ok(outcome),
        Err(e) if !output.status.success() => Err(Error::Protocol(format!(
            "solver exited with {} and no verdict ({e})",
            output.status
        ))),
        Err(e) => Err(e),
    }
}
