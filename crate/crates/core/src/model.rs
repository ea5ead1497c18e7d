//! Binarised network definition and its two forward semantics.
//!
//! A network is a stack of inner blocks (sign-weight linear layer, batch
//! norm, sign activation) followed by an output block (sign-weight linear
//! layer and argmax). [`forward_reference`] runs the blocks in real
//! arithmetic. [`forward_folded`] first folds every neuron into an integer
//! threshold on its dot product and every pair of output rows into an integer
//! comparator; that folded form is exactly what the CNF encoder compiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default batch-norm stabiliser.
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Element of a bipolar vector: `+1` or `-1`.
pub type Bipolar = i8;

/// Binarisation: `+1` when `z >= 0`, `-1` otherwise.
pub fn sign_step(z: f64) -> Result<Bipolar> {
    if !z.is_finite() {
        return Err(Error::InvalidInput(format!("sign of non-finite value {z}")));
    }
    Ok(if z >= 0.0 { 1 } else { -1 })
}

pub fn check_bipolar(x: &[Bipolar], expected_len: usize) -> Result<()> {
    if x.len() != expected_len {
        return Err(Error::Dimension {
            context: "input vector",
            expected: expected_len,
            got: x.len(),
        });
    }
    if let Some(p) = x.iter().position(|&v| v != 1 && v != -1) {
        return Err(Error::InvalidInput(format!(
            "entry {p} is {}, expected +1 or -1",
            x[p]
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormParams {
    pub mu: Vec<f64>,
    /// Standard deviation, used as `(y - mu) / (sigma + epsilon)`.
    pub sigma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub epsilon: f64,
}

impl BatchNormParams {
    pub fn neuron(&self, i: usize) -> NeuronBatchNorm {
        NeuronBatchNorm {
            mu: self.mu[i],
            sigma: self.sigma[i],
            alpha: self.alpha[i],
            gamma: self.gamma[i],
            epsilon: self.epsilon,
        }
    }
}

/// Batch-norm parameters of a single neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronBatchNorm {
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl NeuronBatchNorm {
    fn validate(&self) -> Result<()> {
        let finite = [self.mu, self.sigma, self.alpha, self.gamma, self.epsilon]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel(
                "non-finite batch-norm parameter".into(),
            ));
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidModel(format!(
                "negative sigma {}",
                self.sigma
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.mu) / (self.sigma + self.epsilon) * self.alpha + self.gamma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerBlock {
    pub weights: Vec<Vec<i8>>,
    pub bias: Vec<f64>,
    pub bn: BatchNormParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputBlock {
    pub weights: Vec<Vec<i8>>,
    pub bias: Vec<f64>,
}

impl OutputBlock {
    pub fn classes(&self) -> usize {
        self.weights.len()
    }
}

/// Pixel layout of the input layer, carried so images can be rendered
/// without knowing the training setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnnModel {
    pub arch: Vec<usize>,
    pub inner_blocks: Vec<InnerBlock>,
    pub output_block: OutputBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageShape>,
}

fn check_sign_matrix(weights: &[Vec<i8>], rows: usize, cols: usize, what: &str) -> Result<()> {
    if weights.len() != rows {
        return Err(Error::InvalidModel(format!(
            "{what}: expected {rows} weight rows, found {}",
            weights.len()
        )));
    }
    for (r, row) in weights.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::InvalidModel(format!(
                "{what}: row {r} has {} entries, expected {cols}",
                row.len()
            )));
        }
        if row.iter().any(|&w| w != 1 && w != -1) {
            return Err(Error::InvalidModel(format!(
                "{what}: row {r} has a weight outside {{-1, +1}}"
            )));
        }
    }
    Ok(())
}

impl BnnModel {
    pub fn input_width(&self) -> usize {
        self.arch[0]
    }

    pub fn classes(&self) -> usize {
        self.output_block.classes()
    }

    pub fn image_shape(&self) -> ImageShape {
        self.image.unwrap_or(ImageShape {
            width: self.input_width(),
            height: 1,
        })
    }

    /// Checks every structural invariant: sign weights, agreeing layer
    /// dimensions, finite biases, and valid batch-norm statistics.
    pub fn validate(&self) -> Result<()> {
        if self.arch.len() < 2 {
            return Err(Error::InvalidModel(
                "arch needs at least an input and an output width".into(),
            ));
        }
        if self.arch.contains(&0) {
            return Err(Error::InvalidModel("layer widths must be positive".into()));
        }
        if self.inner_blocks.len() != self.arch.len() - 2 {
            return Err(Error::InvalidModel(format!(
                "arch {:?} implies {} inner blocks, found {}",
                self.arch,
                self.arch.len() - 2,
                self.inner_blocks.len()
            )));
        }
        for (k, block) in self.inner_blocks.iter().enumerate() {
            let (rows, cols) = (self.arch[k + 1], self.arch[k]);
            let what = format!("inner block {k}");
            check_sign_matrix(&block.weights, rows, cols, &what)?;
            let bn = &block.bn;
            for (name, len) in [
                ("bias", block.bias.len()),
                ("bn.mu", bn.mu.len()),
                ("bn.sigma", bn.sigma.len()),
                ("bn.alpha", bn.alpha.len()),
                ("bn.gamma", bn.gamma.len()),
            ] {
                if len != rows {
                    return Err(Error::InvalidModel(format!(
                        "{what}: {name} has length {len}, expected {rows}"
                    )));
                }
            }
            if block.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidModel(format!("{what}: non-finite bias")));
            }
            for i in 0..rows {
                bn.neuron(i).validate()?;
            }
        }
        let out = &self.output_block;
        let (rows, cols) = (
            self.arch[self.arch.len() - 1],
            self.arch[self.arch.len() - 2],
        );
        check_sign_matrix(&out.weights, rows, cols, "output block")?;
        if out.bias.len() != rows {
            return Err(Error::InvalidModel(format!(
                "output block: bias has length {}, expected {rows}",
                out.bias.len()
            )));
        }
        if out.bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidModel("output block: non-finite bias".into()));
        }
        if let Some(shape) = self.image {
            if shape.width * shape.height != self.arch[0] {
                return Err(Error::InvalidModel(format!(
                    "image {}x{} does not match input width {}",
                    shape.width, shape.height, self.arch[0]
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<BnnModel> {
        let model: BnnModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serialises");
        s.push('\n');
        s
    }
}

/// Integer predicate that replaces linear layer + batch norm + sign for one
/// neuron. `dot` is the integer `<a_i, x>` over a bipolar input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeuronThreshold {
    /// Fires (+1) iff `dot >= C`.
    AtLeast(i64),
    /// Fires (+1) iff `dot <= C`.
    AtMost(i64),
    ConstPlus,
    ConstMinus,
}

impl NeuronThreshold {
    #[inline]
    pub fn fires(self, dot: i64) -> bool {
        match self {
            NeuronThreshold::AtLeast(c) => dot >= c,
            NeuronThreshold::AtMost(c) => dot <= c,
            NeuronThreshold::ConstPlus => true,
            NeuronThreshold::ConstMinus => false,
        }
    }
}

fn clamp_threshold(value: f64, n: usize) -> i64 {
    let limit = n as f64 + 1.0;
    value.clamp(-limit, limit) as i64
}

/// Folds one neuron's linear + batch-norm + sign pipeline into an integer
/// threshold on `<a_i, x>`.
///
/// With `R = mu - gamma * (sigma + eps) / alpha` the neuron fires iff
/// `<a_i, x> + b >= R` (alpha > 0) or `<= R` (alpha < 0); the dot product is
/// an integer, so rounding `R - b` up (resp. down) is exact.
pub fn fold_neuron(weights_row: &[i8], bias: f64, bn: NeuronBatchNorm) -> Result<NeuronThreshold> {
    bn.validate()?;
    if !bias.is_finite() {
        return Err(Error::InvalidModel("non-finite bias".into()));
    }
    let n = weights_row.len();
    if bn.alpha == 0.0 {
        return Ok(if bn.gamma >= 0.0 {
            NeuronThreshold::ConstPlus
        } else {
            NeuronThreshold::ConstMinus
        });
    }
    let r = bn.mu - bn.gamma * (bn.sigma + bn.epsilon) / bn.alpha;
    let target = r - bias;
    if target.is_nan() {
        return Err(Error::InvalidModel("batch-norm fold produced NaN".into()));
    }
    Ok(if bn.alpha > 0.0 {
        NeuronThreshold::AtLeast(clamp_threshold(target.ceil(), n))
    } else {
        NeuronThreshold::AtMost(clamp_threshold(target.floor(), n))
    })
}

/// `ceil((a - b) / 2)` computed on the exact real difference of two finite
/// doubles, so comparisons built from it stay transitive.
pub fn ceil_half_diff(a: f64, b: f64) -> f64 {
    let d = a - b;
    // TwoSum: `d + err` is exactly `a - b`.
    let nb = -b;
    let bv = d - a;
    let av = d - bv;
    let err = (a - av) + (nb - bv);
    if d != 0.0 && d.abs() < f64::MIN_POSITIVE {
        // Subnormal: halving may round, but the answer only depends on sign.
        return if d > 0.0 { 1.0 } else { 0.0 };
    }
    let h = d / 2.0;
    if h.fract() != 0.0 || err == 0.0 {
        h.ceil()
    } else if err > 0.0 {
        h + 1.0
    } else {
        h
    }
}

/// Integer threshold for the ordered output comparator `l_i >= l_j`.
///
/// Holds iff `(<a_i, x> - <a_j, x>) / 2 >= threshold`; the left side is an
/// integer because rows are sign vectors.
pub fn fold_comparator(bias_i: f64, bias_j: f64, n: usize) -> i64 {
    clamp_threshold(ceil_half_diff(bias_j, bias_i), n)
}

/// The label picked by the comparator rule: class `i` wins iff it is
/// strictly above every earlier class and at least as large as every later
/// class. Returns `None` only if `geq` is not a total preorder.
pub fn select_label(classes: usize, mut geq: impl FnMut(usize, usize) -> bool) -> Option<usize> {
    (0..classes).find(|&i| (0..i).all(|j| !geq(j, i)) && (i + 1..classes).all(|j| geq(i, j)))
}

/// A network with every neuron and comparator folded to integers.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedModel {
    pub input_width: usize,
    pub layers: Vec<FoldedLayer>,
    pub output_weights: Vec<Vec<i8>>,
    /// `comparators[i][j]` is the threshold for `l_i >= l_j`; the diagonal is 0.
    pub comparators: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldedLayer {
    pub weights: Vec<Vec<i8>>,
    pub thresholds: Vec<NeuronThreshold>,
}

#[inline]
fn dot(row: &[i8], x: &[i8]) -> i64 {
    row.iter().zip(x).map(|(&w, &v)| (w * v) as i64).sum()
}

impl FoldedModel {
    pub fn new(model: &BnnModel) -> Result<FoldedModel> {
        model.validate()?;
        let mut layers = Vec::with_capacity(model.inner_blocks.len());
        for block in &model.inner_blocks {
            let thresholds = block
                .weights
                .iter()
                .enumerate()
                .map(|(i, row)| fold_neuron(row, block.bias[i], block.bn.neuron(i)))
                .collect::<Result<Vec<_>>>()?;
            layers.push(FoldedLayer {
                weights: block.weights.clone(),
                thresholds,
            });
        }
        let out = &model.output_block;
        let c = out.classes();
        let n = model.arch[model.arch.len() - 2];
        let comparators = (0..c)
            .map(|i| {
                (0..c)
                    .map(|j| {
                        if i == j {
                            0
                        } else {
                            fold_comparator(out.bias[i], out.bias[j], n)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(FoldedModel {
            input_width: model.input_width(),
            layers,
            output_weights: out.weights.clone(),
            comparators,
        })
    }

    pub fn classes(&self) -> usize {
        self.output_weights.len()
    }

    /// Output dot products `<a_i, x_n>` and hidden activations.
    pub fn hidden_and_scores(&self, x: &[Bipolar]) -> (Vec<Vec<Bipolar>>, Vec<i64>) {
        let mut hidden = Vec::with_capacity(self.layers.len());
        let mut current: Vec<Bipolar> = x.to_vec();
        for layer in &self.layers {
            let next: Vec<Bipolar> = layer
                .weights
                .iter()
                .zip(&layer.thresholds)
                .map(|(row, t)| if t.fires(dot(row, &current)) { 1 } else { -1 })
                .collect();
            hidden.push(next.clone());
            current = next;
        }
        let scores = self
            .output_weights
            .iter()
            .map(|row| dot(row, &current))
            .collect();
        (hidden, scores)
    }

    /// Comparator `l_i >= l_j` evaluated on output dot products.
    #[inline]
    pub fn compare(&self, scores: &[i64], i: usize, j: usize) -> bool {
        (scores[i] - scores[j]) / 2 >= self.comparators[i][j]
    }

    pub fn label_from_scores(&self, scores: &[i64]) -> usize {
        select_label(self.classes(), |i, j| self.compare(scores, i, j))
            .expect("folded comparators form a total preorder")
    }

    pub fn eval(&self, x: &[Bipolar]) -> Result<(usize, Vec<Vec<Bipolar>>)> {
        check_bipolar(x, self.input_width)?;
        let (hidden, scores) = self.hidden_and_scores(x);
        Ok((self.label_from_scores(&scores), hidden))
    }
}

/// Real-valued inference: linear, batch norm and sign per inner block, then
/// argmax over logits with ties going to the lowest index.
pub fn forward_reference(model: &BnnModel, x: &[Bipolar]) -> Result<(usize, Vec<f64>)> {
    check_bipolar(x, model.input_width())?;
    let mut current: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    for block in &model.inner_blocks {
        let mut next = Vec::with_capacity(block.weights.len());
        for (i, row) in block.weights.iter().enumerate() {
            let y: f64 = row
                .iter()
                .zip(&current)
                .map(|(&w, &v)| w as f64 * v)
                .sum::<f64>()
                + block.bias[i];
            next.push(sign_step(block.bn.neuron(i).apply(y))? as f64);
        }
        current = next;
    }
    let out = &model.output_block;
    let logits: Vec<f64> = out
        .weights
        .iter()
        .zip(&out.bias)
        .map(|(row, b)| {
            row.iter()
                .zip(&current)
                .map(|(&w, &v)| w as f64 * v)
                .sum::<f64>()
                + b
        })
        .collect();
    let mut label = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[label] {
            label = i;
        }
    }
    Ok((label, logits))
}

/// Integer inference through folded thresholds and comparators. This is the
/// semantics the CNF encoding reproduces exactly.
pub fn forward_folded(model: &BnnModel, x: &[Bipolar]) -> Result<(usize, Vec<Vec<Bipolar>>)> {
    FoldedModel::new(model)?.eval(x)
}

/// Bipolar vector of width `n` whose position `p` is `+1` iff bit `p` of
/// `bits` is set. Counting `bits` over `0..2^n` enumerates every input.
pub fn bipolar_from_bits(bits: u64, n: usize) -> Vec<Bipolar> {
    (0..n)
        .map(|p| if bits >> p & 1 == 1 { 1 } else { -1 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bn(mu: f64, sigma: f64, alpha: f64, gamma: f64) -> NeuronBatchNorm {
        NeuronBatchNorm {
            mu,
            sigma,
            alpha,
            gamma,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Real-valued single neuron, written out independently of `apply`.
    fn neuron_reference(row: &[i8], bias: f64, p: NeuronBatchNorm, x: &[i8]) -> bool {
        let mut y = bias;
        for (w, v) in row.iter().zip(x) {
            y += (*w as f64) * (*v as f64);
        }
        let z = (y - p.mu) / (p.sigma + p.epsilon) * p.alpha + p.gamma;
        z >= 0.0
    }

    #[test]
    fn sign_step_cases() {
        assert_eq!(sign_step(0.0).unwrap(), 1);
        assert_eq!(sign_step(-0.3).unwrap(), -1);
        assert_eq!(sign_step(7.2).unwrap(), 1);
        assert!(sign_step(f64::NAN).is_err());
        assert!(sign_step(f64::INFINITY).is_err());
    }

    #[test]
    fn fold_positive_alpha_example() {
        let row = [1, 1, 1];
        let p = bn(0.1, 0.9, 1.0, 0.5);
        // R - b = 0.1 - 0.5 * 0.90001 - 0.2 = -0.550005
        assert_eq!(
            fold_neuron(&row, 0.2, p).unwrap(),
            NeuronThreshold::AtLeast(0)
        );
        for bits in 0..8u64 {
            let x = bipolar_from_bits(bits, 3);
            let d = dot(&row, &x);
            assert_eq!(
                NeuronThreshold::AtLeast(0).fires(d),
                neuron_reference(&row, 0.2, p, &x)
            );
        }
    }

    #[test]
    fn fold_zero_alpha_is_constant() {
        let p = bn(0.3, 1.0, 0.0, -0.2);
        assert_eq!(
            fold_neuron(&[1, -1, 1], 5.0, p).unwrap(),
            NeuronThreshold::ConstMinus
        );
        let p = bn(0.3, 1.0, 0.0, 0.0);
        assert_eq!(
            fold_neuron(&[1], -5.0, p).unwrap(),
            NeuronThreshold::ConstPlus
        );
    }

    #[test]
    fn fold_negative_alpha_example() {
        let row = [1, -1];
        let p = bn(0.0, 1.0, -2.0, 0.0);
        assert_eq!(
            fold_neuron(&row, 0.0, p).unwrap(),
            NeuronThreshold::AtMost(0)
        );
        for bits in 0..4u64 {
            let x = bipolar_from_bits(bits, 2);
            assert_eq!(
                NeuronThreshold::AtMost(0).fires(dot(&row, &x)),
                neuron_reference(&row, 0.0, p, &x)
            );
        }
    }

    #[test]
    fn fold_clamps_extreme_thresholds() {
        let p = bn(1e12, 1.0, 1.0, 0.0);
        assert_eq!(
            fold_neuron(&[1, 1], 0.0, p).unwrap(),
            NeuronThreshold::AtLeast(3)
        );
        let p = bn(-1e12, 1.0, -1.0, 0.0);
        assert_eq!(
            fold_neuron(&[1, 1], 0.0, p).unwrap(),
            NeuronThreshold::AtMost(-3)
        );
    }

    #[test]
    fn fold_rejects_bad_params() {
        assert!(fold_neuron(&[1], 0.0, bn(0.0, -1.0, 1.0, 0.0)).is_err());
        let mut p = bn(0.0, 1.0, 1.0, 0.0);
        p.epsilon = 0.0;
        assert!(fold_neuron(&[1], 0.0, p).is_err());
    }

    #[test]
    fn ceil_half_diff_exactness() {
        assert_eq!(ceil_half_diff(3.0, 1.0), 1.0);
        assert_eq!(ceil_half_diff(3.0, 0.0), 2.0);
        assert_eq!(ceil_half_diff(-3.0, 0.0), -1.0);
        assert_eq!(ceil_half_diff(0.0, 0.0), 0.0);
        let a = 2.0 + f64::EPSILON * 2.0;
        assert_eq!(ceil_half_diff(a, 0.0), 2.0);
        // 1e-30 + 2 rounds to 2.0; the true half-difference is just above 1
        assert_eq!(ceil_half_diff(1e-30, -2.0), 2.0);
        assert_eq!(ceil_half_diff(-1e-30, 2.0), -1.0);
        assert_eq!(ceil_half_diff(f64::from_bits(1), 0.0), 1.0);
    }

    fn tiny_model() -> BnnModel {
        BnnModel {
            arch: vec![2, 1, 2],
            inner_blocks: vec![InnerBlock {
                weights: vec![vec![1, 1]],
                bias: vec![0.0],
                bn: BatchNormParams {
                    mu: vec![0.0],
                    sigma: vec![1.0],
                    alpha: vec![1.0],
                    gamma: vec![100.0],
                    epsilon: DEFAULT_EPSILON,
                },
            }],
            output_block: OutputBlock {
                weights: vec![vec![1], vec![1]],
                bias: vec![0.0, 0.0],
            },
            image: None,
        }
    }

    #[test]
    fn dominant_gamma_forces_plus_and_ties_go_low() {
        let model = tiny_model();
        for bits in 0..4 {
            let x = bipolar_from_bits(bits, 2);
            let (label, hidden) = forward_folded(&model, &x).unwrap();
            assert_eq!(hidden, vec![vec![1]]);
            assert_eq!(label, 0);
            assert_eq!(forward_reference(&model, &x).unwrap().0, 0);
        }
    }

    #[test]
    fn validation_catches_structure_errors() {
        let mut m = tiny_model();
        m.inner_blocks[0].weights[0][1] = 0;
        assert!(m.validate().is_err());
        let mut m = tiny_model();
        m.output_block.bias.pop();
        assert!(m.validate().is_err());
        let mut m = tiny_model();
        m.arch = vec![3, 1, 2];
        assert!(m.validate().is_err());
        let mut m = tiny_model();
        m.inner_blocks[0].bn.sigma[0] = -1.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = tiny_model();
        assert!(matches!(
            forward_folded(&m, &[1]),
            Err(Error::Dimension { .. })
        ));
        assert!(forward_reference(&m, &[1, 0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = tiny_model();
        assert_eq!(BnnModel::from_json(&m.to_json()).unwrap(), m);
    }

    proptest! {
        #[test]
        fn folded_neuron_matches_reference_off_boundary(
            row in prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 1..7),
            bias in -4.0f64..4.0,
            mu in -3.0f64..3.0,
            sigma in 0.0f64..3.0,
            alpha in -3.0f64..3.0,
            gamma in -3.0f64..3.0,
        ) {
            let p = bn(mu, sigma, alpha, gamma);
            let t = fold_neuron(&row, bias, p).unwrap();
            let boundary = mu - gamma * (sigma + p.epsilon) / alpha - bias;
            prop_assume!(alpha == 0.0 || (boundary - boundary.round()).abs() > 1e-9);
            let n = row.len();
            for bits in 0..(1u64 << n) {
                let x = bipolar_from_bits(bits, n);
                prop_assert_eq!(t.fires(dot(&row, &x)), neuron_reference(&row, bias, p, &x));
            }
        }

        #[test]
        fn positive_alpha_is_monotone_in_gamma(
            row in prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 1..7),
            bias in -4.0f64..4.0,
            alpha in 0.01f64..3.0,
            gamma in -3.0f64..3.0,
            bump in 0.0f64..3.0,
        ) {
            let lo = fold_neuron(&row, bias, bn(0.2, 0.7, alpha, gamma)).unwrap();
            let hi = fold_neuron(&row, bias, bn(0.2, 0.7, alpha, gamma + bump)).unwrap();
            let n = row.len();
            for bits in 0..(1u64 << n) {
                let d = dot(&row, &bipolar_from_bits(bits, n));
                prop_assert!(!lo.fires(d) || hi.fires(d));
            }
        }

        #[test]
        fn comparator_rule_picks_exactly_one(
            biases in prop::collection::vec(-3.0f64..3.0, 1..6),
            scores in prop::collection::vec(-6i64..6, 6),
        ) {
            let c = biases.len();
            // scores must share parity, as sign-vector dot products do
            let scores: Vec<i64> = scores[..c].iter().map(|s| s * 2).collect();
            let geq = |i: usize, j: usize| (scores[i] - scores[j]) / 2 >= fold_comparator(biases[i], biases[j], 100);
            let winners = (0..c)
                .filter(|&i| (0..i).all(|j| !geq(j, i)) && (i + 1..c).all(|j| geq(i, j)))
                .count();
            prop_assert_eq!(winners, 1);
            // and it is the lowest-index argmax of the exact logits
            let logits: Vec<f64> = (0..c).map(|i| scores[i] as f64 + biases[i]).collect();
            let best = select_label(c, geq).unwrap();
            prop_assert!(logits.iter().all(|&l| l <= logits[best]));
        }
    }
}
