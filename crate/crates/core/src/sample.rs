//! Inference, inversion, preimage enumeration and diverse sampling on top of
//! the encoder and the solver.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::cnf::{CnfFormula, Lit};
use crate::encode::VariableMap;
use crate::error::{Error, Result};
use crate::model::{check_bipolar, Bipolar, BnnModel, FoldedModel};
use crate::solve::{SolveStatus, Solver};

/// Reusable inference oracle: one solver instance answers many
/// `formula AND inputs = x` queries through assumptions.
pub struct InferenceEngine<'a> {
    solver: Solver,
    varmap: &'a VariableMap,
}

impl<'a> InferenceEngine<'a> {
    pub fn new(formula: &CnfFormula, varmap: &'a VariableMap) -> Self {
        InferenceEngine {
            solver: Solver::from_formula(formula),
            varmap,
        }
    }

    /// Label read from the unique true output indicator. An unsatisfiable or
    /// ambiguous query means the encoding is broken and is reported as an
    /// internal error.
    pub fn infer(&mut self, x: &[Bipolar]) -> Result<usize> {
        check_bipolar(x, self.varmap.input_width())?;
        let assumptions = self.varmap.input_assumptions(x);
        let out = self.solver.solve(&assumptions);
        match (out.status, out.model) {
            (SolveStatus::Sat, Some(m)) => {
                let labels = self.varmap.true_outputs(&m);
                match labels.as_slice() {
                    [label] => Ok(*label),
                    _ => Err(Error::Internal(format!(
                        "inference model has output indicators {labels:?} set"
                    ))),
                }
            }
            (SolveStatus::Unsat, _) => Err(Error::Internal(
                "inference query is unsatisfiable for a complete input".into(),
            )),
            _ => Err(Error::Internal("inference query undecided".into())),
        }
    }
}

/// Runs inference by fixing every input variable and solving.
pub fn infer_sat(formula: &CnfFormula, varmap: &VariableMap, x: &[Bipolar]) -> Result<usize> {
    InferenceEngine::new(formula, varmap).infer(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InversionQuery {
    pub target_label: usize,
    pub num_samples: usize,
    pub seed: u64,
    /// Block each returned input so no input is returned twice.
    pub distinct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InversionStatus {
    Satisfiable,
    /// No input maps to the label: the inversion query is unsatisfiable.
    UnsatLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub target_label: usize,
    pub status: InversionStatus,
    pub inputs: Vec<Vec<Bipolar>>,
    /// Per input: the folded network really assigns it `target_label`.
    pub verified: Vec<bool>,
    pub distinct_count: usize,
    pub mean_pairwise_hamming: f64,
    /// Sampling stopped early because no further distinct input exists.
    pub exhausted: bool,
}

impl InversionReport {
    pub fn all_verified(&self) -> bool {
        self.verified.iter().all(|&v| v)
    }
}

/// Per-sample seeds drawn from one query seed.
fn sample_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn blocking_clause(varmap: &VariableMap, x: &[Bipolar]) -> Vec<Lit> {
    varmap
        .input_vars
        .ids()
        .zip(x)
        .map(|(v, &s)| Lit::with_value(v, s < 0))
        .collect()
}

fn check_label(varmap: &VariableMap, label: usize) -> Result<Lit> {
    varmap.output_lit(label).ok_or_else(|| {
        Error::InvalidInput(format!(
            "label {label} out of range for {} classes",
            varmap.classes()
        ))
    })
}

/// Samples inputs the network maps to `query.target_label`.
///
/// The target indicator is asserted and the solver is re-run with a fresh
/// seed per sample. Each returned input is re-checked against the folded
/// network of `model`.
pub fn invert(
    formula: &CnfFormula,
    varmap: &VariableMap,
    model: &BnnModel,
    query: &InversionQuery,
) -> Result<InversionReport> {
    let target = check_label(varmap, query.target_label)?;
    if query.num_samples == 0 {
        return Err(Error::InvalidInput("num_samples must be at least 1".into()));
    }
    if model.input_width() != varmap.input_width() || model.classes() != varmap.classes() {
        return Err(Error::InvalidInput(
            "model does not match the manifest".into(),
        ));
    }
    let folded = FoldedModel::new(model)?;
    let mut solver = Solver::from_formula(formula);
    solver.add_clause(&[target]);

    let mut inputs = Vec::new();
    let mut exhausted = false;
    for i in 0..query.num_samples {
        let out = solver.solve_randomized(&[], sample_seed(query.seed, i));
        match (out.status, out.model) {
            (SolveStatus::Sat, Some(m)) => {
                let x = varmap.project_inputs(&m);
                if query.distinct {
                    solver.add_clause(&blocking_clause(varmap, &x));
                }
                inputs.push(x);
            }
            (SolveStatus::Unsat, _) => {
                exhausted = true;
                break;
            }
            _ => return Err(Error::Internal("inversion query undecided".into())),
        }
    }
    let verified = inputs
        .iter()
        .map(|x| folded.eval(x).map(|(label, _)| label == query.target_label))
        .collect::<Result<Vec<_>>>()?;
    let (distinct_count, mean_pairwise_hamming) = diversity_stats(&inputs);
    Ok(InversionReport {
        target_label: query.target_label,
        status: if inputs.is_empty() {
            InversionStatus::UnsatLabel
        } else {
            InversionStatus::Satisfiable
        },
        inputs,
        verified,
        distinct_count,
        mean_pairwise_hamming,
        exhausted,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preimage {
    pub inputs: Vec<Vec<Bipolar>>,
    /// `cap` was reached while more inputs exist.
    pub truncated: bool,
}

/// Every input mapped to `label`, up to `cap`, by solving and blocking the
/// input projection of each model. The order is deterministic.
pub fn enumerate_preimage(
    formula: &CnfFormula,
    varmap: &VariableMap,
    label: usize,
    cap: usize,
) -> Result<Preimage> {
    let target = check_label(varmap, label)?;
    if cap == 0 {
        return Err(Error::InvalidInput("cap must be at least 1".into()));
    }
    let mut solver = Solver::from_formula(formula);
    solver.add_clause(&[target]);
    let mut inputs = Vec::new();
    loop {
        let out = solver.solve(&[]);
        match (out.status, out.model) {
            (SolveStatus::Sat, Some(m)) => {
                if inputs.len() == cap {
                    return Ok(Preimage {
                        inputs,
                        truncated: true,
                    });
                }
                let x = varmap.project_inputs(&m);
                solver.add_clause(&blocking_clause(varmap, &x));
                inputs.push(x);
            }
            (SolveStatus::Unsat, _) => {
                return Ok(Preimage {
                    inputs,
                    truncated: false,
                })
            }
            _ => return Err(Error::Internal("enumeration query undecided".into())),
        }
    }
}

/// Number of distinct inputs and mean Hamming distance over all unordered
/// pairs (0 with fewer than two inputs).
pub fn diversity_stats(inputs: &[Vec<Bipolar>]) -> (usize, f64) {
    let distinct = inputs.iter().collect::<HashSet<_>>().len();
    if inputs.len() < 2 {
        return (distinct, 0.0);
    }
    let mut total = 0u64;
    let mut pairs = 0u64;
    for (i, a) in inputs.iter().enumerate() {
        for b in &inputs[i + 1..] {
            total += a.iter().zip(b).filter(|(x, y)| x != y).count() as u64;
            pairs += 1;
        }
    }
    (distinct, total as f64 / pairs as f64)
}
