//! Independent oracles and equivalence harnesses.
//!
//! Ground truth is always the folded network ([`FoldedModel`]); the SAT side
//! is checked against it by exhaustive or sampled enumeration.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cnf::CnfFormula;
use crate::encode::VariableMap;
use crate::error::{Error, Result};
use crate::model::{
    bipolar_from_bits, BatchNormParams, Bipolar, BnnModel, FoldedModel, InnerBlock,
    NeuronThreshold, OutputBlock, DEFAULT_EPSILON,
};
use crate::sample::{enumerate_preimage, invert, InferenceEngine, InversionQuery, InversionStatus};

/// Widest input layer the brute-force oracle will enumerate.
pub const MAX_BRUTE_FORCE_WIDTH: usize = 25;
/// Up to this width, inference checks always run exhaustively.
pub const EXHAUSTIVE_WIDTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub input: Vec<Bipolar>,
    /// Label the folded network assigns, if the input is relevant to it.
    pub expected: Option<usize>,
    /// Label the SAT side produced, `None` if it produced none.
    pub got: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub total_checked: u64,
    pub mismatches: Vec<Mismatch>,
    pub pass: bool,
}

impl EquivalenceReport {
    fn finish(mut self) -> Self {
        self.pass = self.mismatches.is_empty();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSelection {
    Exhaustive,
    Random { count: usize, seed: u64 },
}

/// Bit-packed folded evaluator for networks whose layers are all at most 64
/// wide. A vector is a `u64` with bit `p` set iff position `p` is `+1`.
#[derive(Debug, Clone)]
struct PackedModel {
    // per neuron: packed weight row, fan-in, threshold
    layers: Vec<Vec<(u64, i64, NeuronThreshold)>>,
    output: Vec<u64>,
    last_width: usize,
    folded: FoldedModel,
}

fn pack(row: &[i8]) -> u64 {
    row.iter()
        .enumerate()
        .fold(0u64, |acc, (p, &w)| if w > 0 { acc | 1 << p } else { acc })
}

fn width_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PackedModel {
    fn new(model: &BnnModel) -> Option<PackedModel> {
        if model.arch.iter().any(|&w| w > 64) {
            return None;
        }
        let folded = FoldedModel::new(model).ok()?;
        let mut layers = Vec::new();
        let mut width = model.input_width();
        for layer in &folded.layers {
            layers.push(
                layer
                    .weights
                    .iter()
                    .zip(&layer.thresholds)
                    .map(|(row, &t)| (pack(row), width as i64, t))
                    .collect(),
            );
            width = layer.weights.len();
        }
        Some(PackedModel {
            layers,
            output: folded.output_weights.iter().map(|r| pack(r)).collect(),
            last_width: width,
            folded,
        })
    }

    #[inline]
    fn dot(row: u64, x: u64, n: i64, mask: u64) -> i64 {
        let agree = (!(row ^ x) & mask).count_ones() as i64;
        2 * agree - n
    }

    fn label(&self, mut x: u64, in_width: usize, scores: &mut Vec<i64>) -> usize {
        let mut mask = width_mask(in_width);
        for layer in &self.layers {
            let mut next = 0u64;
            for (p, &(row, n, t)) in layer.iter().enumerate() {
                if t.fires(Self::dot(row, x, n, mask)) {
                    next |= 1 << p;
                }
            }
            x = next;
            mask = width_mask(layer.len());
        }
        scores.clear();
        let n = self.last_width as i64;
        scores.extend(self.output.iter().map(|&row| Self::dot(row, x, n, mask)));
        self.folded.label_from_scores(scores)
    }
}

fn check_budget(model: &BnnModel) -> Result<()> {
    let width = model.input_width();
    if width > MAX_BRUTE_FORCE_WIDTH {
        return Err(Error::Budget {
            width,
            limit: MAX_BRUTE_FORCE_WIDTH,
        });
    }
    Ok(())
}

/// Calls `visit(bits, label)` for every input of the network.
fn for_each_input(model: &BnnModel, mut visit: impl FnMut(u64, usize)) -> Result<()> {
    check_budget(model)?;
    let n = model.input_width();
    if let Some(packed) = PackedModel::new(model) {
        let mut scores = Vec::new();
        for bits in 0..(1u64 << n) {
            visit(bits, packed.label(bits, n, &mut scores));
        }
    } else {
        let folded = FoldedModel::new(model)?;
        for bits in 0..(1u64 << n) {
            visit(bits, folded.eval(&bipolar_from_bits(bits, n))?.0);
        }
    }
    Ok(())
}

/// Exactly the inputs the folded network maps to `label`, by enumerating
/// all `2^width` inputs. Refuses widths above [`MAX_BRUTE_FORCE_WIDTH`].
pub fn brute_force_preimage(model: &BnnModel, label: usize) -> Result<BTreeSet<Vec<Bipolar>>> {
    let n = model.input_width();
    let mut set = BTreeSet::new();
    for_each_input(model, |bits, l| {
        if l == label {
            set.insert(bipolar_from_bits(bits, n));
        }
    })?;
    Ok(set)
}

/// Size of every label's preimage.
pub fn brute_force_label_counts(model: &BnnModel) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; model.classes()];
    for_each_input(model, |_, l| counts[l] += 1)?;
    Ok(counts)
}

fn selected_inputs(
    width: usize,
    selection: InputSelection,
) -> Box<dyn Iterator<Item = Vec<Bipolar>>> {
    match selection {
        InputSelection::Random { count, seed } if width > EXHAUSTIVE_WIDTH => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Box::new((0..count).map(move |_| {
                (0..width)
                    .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                    .collect()
            }))
        }
        _ => Box::new((0..(1u64 << width)).map(move |b| bipolar_from_bits(b, width))),
    }
}

/// Compares SAT inference against the folded network. Widths up to
/// [`EXHAUSTIVE_WIDTH`] are always checked exhaustively; random selection
/// only applies above that.
pub fn check_inference_equivalence(
    model: &BnnModel,
    formula: &CnfFormula,
    varmap: &VariableMap,
    selection: InputSelection,
) -> Result<EquivalenceReport> {
    let width = model.input_width();
    if width != varmap.input_width() {
        return Err(Error::Dimension {
            context: "manifest inputs",
            expected: width,
            got: varmap.input_width(),
        });
    }
    if matches!(selection, InputSelection::Exhaustive) {
        check_budget(model)?;
    }
    let folded = FoldedModel::new(model)?;
    let mut engine = InferenceEngine::new(formula, varmap);
    let mut report = EquivalenceReport::default();
    for x in selected_inputs(width, selection) {
        let expected = folded.eval(&x)?.0;
        let got = engine.infer(&x).ok();
        report.total_checked += 1;
        if got != Some(expected) {
            report.mismatches.push(Mismatch {
                input: x,
                expected: Some(expected),
                got,
            });
        }
    }
    Ok(report.finish())
}

/// For every label: SAT enumeration equals the brute-force preimage, and
/// the inversion query is `UnsatLabel` exactly when that preimage is empty.
pub fn check_inversion(
    model: &BnnModel,
    formula: &CnfFormula,
    varmap: &VariableMap,
) -> Result<EquivalenceReport> {
    let width = model.input_width();
    if width > EXHAUSTIVE_WIDTH {
        return Err(Error::Budget {
            width,
            limit: EXHAUSTIVE_WIDTH,
        });
    }
    let folded = FoldedModel::new(model)?;
    let mut oracle: Vec<BTreeSet<Vec<Bipolar>>> = vec![BTreeSet::new(); model.classes()];
    for_each_input(model, |bits, l| {
        oracle[l].insert(bipolar_from_bits(bits, width));
    })?;

    let mut report = EquivalenceReport::default();
    for (label, expected) in oracle.iter().enumerate() {
        let found = enumerate_preimage(formula, varmap, label, 1usize << width)?;
        let found_set: BTreeSet<Vec<Bipolar>> = found.inputs.iter().cloned().collect();
        report.total_checked += expected.len().max(found_set.len()) as u64;
        for x in expected.difference(&found_set) {
            report.mismatches.push(Mismatch {
                input: x.clone(),
                expected: Some(label),
                got: None,
            });
        }
        for x in found_set.difference(expected) {
            report.mismatches.push(Mismatch {
                input: x.clone(),
                expected: folded.eval(x).ok().map(|(l, _)| l),
                got: Some(label),
            });
        }
        if found.truncated || found_set.len() != found.inputs.len() {
            report.mismatches.push(Mismatch {
                input: Vec::new(),
                expected: Some(label),
                got: None,
            });
        }

        let query = InversionQuery {
            target_label: label,
            num_samples: 1,
            seed: label as u64,
            distinct: false,
        };
        let inv = invert(formula, varmap, model, &query)?;
        let unsat = inv.status == InversionStatus::UnsatLabel;
        if unsat != expected.is_empty() || !inv.all_verified() {
            report.mismatches.push(Mismatch {
                input: inv.inputs.first().cloned().unwrap_or_default(),
                expected: if expected.is_empty() {
                    None
                } else {
                    Some(label)
                },
                got: if unsat { None } else { Some(label) },
            });
        }
    }
    Ok(report.finish())
}

/// A random valid network for oracle testing.
///
/// Batch-norm scales are drawn negative, zero and positive, and biases are
/// often placed within a hair of an integer so folded thresholds sit on
/// rounding boundaries.
pub fn random_model(arch: &[usize], seed: u64) -> BnnModel {
    assert!(arch.len() >= 2 && arch.iter().all(|&w| w > 0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sign_matrix = |rng: &mut ChaCha8Rng, rows: usize, cols: usize| -> Vec<Vec<i8>> {
        (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                    .collect()
            })
            .collect()
    };
    let near_integer = |rng: &mut ChaCha8Rng, span: i64| -> f64 {
        let base = rng.random_range(-span..=span) as f64;
        match rng.random_range(0..4) {
            0 => base,
            1 => base + 1e-12,
            2 => base - 1e-12,
            _ => base + rng.random_range(-1.0..1.0),
        }
    };

    let mut inner_blocks = Vec::new();
    for k in 0..arch.len() - 2 {
        let (rows, cols) = (arch[k + 1], arch[k]);
        let weights = sign_matrix(&mut rng, rows, cols);
        let span = cols as i64 / 2 + 1;
        let bias = (0..rows).map(|_| near_integer(&mut rng, span)).collect();
        let mut bn = BatchNormParams {
            mu: Vec::new(),
            sigma: Vec::new(),
            alpha: Vec::new(),
            gamma: Vec::new(),
            epsilon: DEFAULT_EPSILON,
        };
        for _ in 0..rows {
            bn.mu.push(rng.random_range(-2.0..2.0));
            bn.sigma.push(if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(0.1..3.0)
            });
            bn.alpha.push(match rng.random_range(0..5) {
                0 => 0.0,
                1 | 2 => -rng.random_range(0.1..2.0),
                _ => rng.random_range(0.1..2.0),
            });
            bn.gamma.push(rng.random_range(-1.5..1.5));
        }
        inner_blocks.push(InnerBlock { weights, bias, bn });
    }
    let (rows, cols) = (arch[arch.len() - 1], arch[arch.len() - 2]);
    let weights = sign_matrix(&mut rng, rows, cols);
    let bias = (0..rows)
        .map(|_| {
            if rng.random_bool(0.3) {
                // even integer offsets make exact logit ties reachable
                2.0 * rng.random_range(-1i64..=1) as f64
            } else {
                near_integer(&mut rng, 2)
            }
        })
        .collect();
    BnnModel {
        arch: arch.to_vec(),
        inner_blocks,
        output_block: OutputBlock { weights, bias },
        image: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::encode_bnn;

    fn constant_model(label: usize) -> BnnModel {
        let mut m = random_model(&[3, 2, 3], 1);
        m.output_block.bias = vec![-50.0; 3];
        m.output_block.bias[label] = 50.0;
        m
    }

    #[test]
    fn packed_evaluator_agrees_with_folded() {
        for seed in 0..30 {
            let arch = [7, 5, 4, 3];
            let m = random_model(&arch, seed);
            let packed = PackedModel::new(&m).unwrap();
            let folded = FoldedModel::new(&m).unwrap();
            let mut scores = Vec::new();
            for bits in 0..(1u64 << 7) {
                let want = folded.eval(&bipolar_from_bits(bits, 7)).unwrap().0;
                assert_eq!(packed.label(bits, 7, &mut scores), want);
            }
        }
    }

    #[test]
    fn constant_label_preimages() {
        let m = constant_model(1);
        assert_eq!(brute_force_preimage(&m, 1).unwrap().len(), 8);
        assert!(brute_force_preimage(&m, 0).unwrap().is_empty());
        assert_eq!(brute_force_label_counts(&m).unwrap(), vec![0, 8, 0]);
    }

    #[test]
    fn over_budget_is_refused() {
        let m = random_model(&[26, 2], 0);
        assert!(matches!(
            brute_force_preimage(&m, 0),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn toy_model_passes_both_harnesses() {
        let m = random_model(&[4, 3, 2], 11);
        let (f, map) = encode_bnn(&m).unwrap();
        let r = check_inference_equivalence(&m, &f, &map, InputSelection::Exhaustive).unwrap();
        assert!(r.pass);
        assert_eq!(r.total_checked, 16);
        assert!(check_inversion(&m, &f, &map).unwrap().pass);
    }

    #[test]
    fn random_selection_above_exhaustive_width() {
        let m = random_model(&[20, 4, 3], 5);
        let (f, map) = encode_bnn(&m).unwrap();
        let r = check_inference_equivalence(
            &m,
            &f,
            &map,
            InputSelection::Random { count: 50, seed: 1 },
        )
        .unwrap();
        assert_eq!(r.total_checked, 50);
        assert!(r.pass);
    }
}
