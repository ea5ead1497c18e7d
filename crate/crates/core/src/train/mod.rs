//! Dataset preparation and straight-through-estimator training.

mod idx;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    forward_reference, BatchNormParams, Bipolar, BnnModel, ImageShape, InnerBlock, OutputBlock,
    DEFAULT_EPSILON,
};

pub use idx::{load_idx, parse_idx_images, parse_idx_labels, RawDataset};

/// Binarised images, row-major, with labels in `0..10`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub width: usize,
    pub height: usize,
    pub images: Vec<Vec<Bipolar>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Downscales and binarises every image of `raw`.
    pub fn from_raw(raw: &RawDataset, width: usize, height: usize) -> Result<Dataset> {
        let images = raw
            .images
            .iter()
            .map(|img| downscale_binarize(img, raw.cols, raw.rows, width, height))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            width,
            height,
            images,
            labels: raw.labels.iter().map(|&l| l as usize).collect(),
        })
    }

    /// Loads `{prefix}-images-idx3-ubyte[.gz]` and the matching label file
    /// from `dir`, with `prefix` being `train` or `t10k`.
    pub fn load(dir: &Path, prefix: &str, width: usize, height: usize) -> Result<Dataset> {
        let find = |stem: String| {
            let gz = dir.join(format!("{stem}.gz"));
            if gz.exists() {
                gz
            } else {
                dir.join(stem)
            }
        };
        let raw = load_idx(
            &find(format!("{prefix}-images-idx3-ubyte")),
            &find(format!("{prefix}-labels-idx1-ubyte")),
        )?;
        Dataset::from_raw(&raw, width, height)
    }
}

/// Area-averages a `src_w x src_h` image onto a `width x height` grid, then
/// thresholds each cell at 0.5 (`>= 0.5` gives `+1`).
///
/// Each output cell covers a possibly fractional block of source pixels; a
/// source pixel contributes in proportion to its overlap with the cell.
pub fn downscale_binarize(
    image: &[f32],
    src_w: usize,
    src_h: usize,
    width: usize,
    height: usize,
) -> Result<Vec<Bipolar>> {
    if image.len() != src_w * src_h {
        return Err(Error::Dimension {
            context: "source image",
            expected: src_w * src_h,
            got: image.len(),
        });
    }
    if width == 0 || height == 0 || width > src_w || height > src_h {
        return Err(Error::InvalidInput(format!(
            "cannot downscale {src_w}x{src_h} to {width}x{height}"
        )));
    }
    let overlap = |cell: usize, cells: usize, src: usize| -> Vec<(usize, f64)> {
        let scale = src as f64 / cells as f64;
        let (lo, hi) = (cell as f64 * scale, (cell + 1) as f64 * scale);
        (lo.floor() as usize..(hi.ceil() as usize).min(src))
            .map(|p| (p, (hi.min(p as f64 + 1.0) - lo.max(p as f64)).max(0.0)))
            .filter(|&(_, w)| w > 0.0)
            .collect()
    };
    let mut out = Vec::with_capacity(width * height);
    for r in 0..height {
        let rows = overlap(r, height, src_h);
        for c in 0..width {
            let cols = overlap(c, width, src_w);
            let mut sum = 0.0;
            let mut area = 0.0;
            for &(y, wy) in &rows {
                for &(x, wx) in &cols {
                    sum += image[y * src_w + x] as f64 * wy * wx;
                    area += wy * wx;
                }
            }
            out.push(if sum / area >= 0.5 { 1 } else { -1 });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 25,
            batch_size: 100,
            learning_rate: 0.2,
            seed: 0,
        }
    }
}

const BN_MOMENTUM: f64 = 0.9;

/// The loss sees `logits / sqrt(fan_in)`. Logits of a sign layer grow with
/// its fan-in and would otherwise saturate the softmax; the scale does not
/// change any prediction.
fn loss_temperature(fan_in: usize) -> f64 {
    (fan_in as f64).sqrt()
}

/// Row-major dense matrix.
#[derive(Clone)]
struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn binarized(&self) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|&w| if w >= 0.0 { 1.0 } else { -1.0 })
                .collect(),
        }
    }
}

/// `x` is batch x n_in, `w` is n_out x n_in; returns batch x n_out.
fn affine(x: &Mat, w: &Mat, bias: &[f64]) -> Mat {
    let mut y = Mat::zeros(x.rows, w.rows);
    for b in 0..x.rows {
        let xr = x.row(b);
        for (i, yi) in y.row_mut(b).iter_mut().enumerate() {
            *yi = w.row(i).iter().zip(xr).map(|(a, c)| a * c).sum::<f64>() + bias[i];
        }
    }
    y
}

/// Accumulates `dy^T x` into a weight gradient and, when asked, `dy w` into
/// an input gradient.
fn affine_backward(x: &Mat, w: &Mat, dy: &Mat, want_dx: bool) -> (Mat, Vec<f64>, Option<Mat>) {
    let mut dw = Mat::zeros(w.rows, w.cols);
    let mut db = vec![0.0; w.rows];
    let mut dx = want_dx.then(|| Mat::zeros(x.rows, x.cols));
    for b in 0..x.rows {
        let xr = x.row(b);
        for (i, &g) in dy.row(b).iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            db[i] += g;
            for (d, &v) in dw.row_mut(i).iter_mut().zip(xr) {
                *d += g * v;
            }
            if let Some(dx) = dx.as_mut() {
                for (d, &v) in dx.row_mut(b).iter_mut().zip(w.row(i)) {
                    *d += g * v;
                }
            }
        }
    }
    (dw, db, dx)
}

struct HiddenLayer {
    latent: Mat,
    bias: Vec<f64>,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    running_mu: Vec<f64>,
    running_sigma: Vec<f64>,
}

struct HiddenCache {
    input: Mat,
    w: Mat,
    y: Mat,
    y_hat: Mat,
    z: Mat,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

fn init_latent(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    let limit = (6.0 / (rows + cols) as f64).sqrt().min(1.0);
    let mut m = Mat::zeros(rows, cols);
    for v in &mut m.data {
        *v = rng.random_range(-limit..limit);
    }
    m
}

fn sgd_latent(latent: &mut Mat, grad: &Mat, lr: f64) {
    for (w, g) in latent.data.iter_mut().zip(&grad.data) {
        if w.abs() <= 1.0 {
            *w -= lr * g;
        }
        *w = w.clamp(-1.0, 1.0);
    }
}

fn sgd(params: &mut [f64], grad: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * g;
    }
}

impl HiddenLayer {
    fn forward(&self, input: Mat) -> (Mat, HiddenCache) {
        let w = self.latent.binarized();
        let y = affine(&input, &w, &self.bias);
        let n = y.rows as f64;
        let mut mu = vec![0.0; y.cols];
        let mut sigma = vec![0.0; y.cols];
        for b in 0..y.rows {
            for (m, v) in mu.iter_mut().zip(y.row(b)) {
                *m += v / n;
            }
        }
        for b in 0..y.rows {
            for ((s, v), m) in sigma.iter_mut().zip(y.row(b)).zip(&mu) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut sigma {
            *s = s.sqrt();
        }
        let mut y_hat = Mat::zeros(y.rows, y.cols);
        let mut z = Mat::zeros(y.rows, y.cols);
        let mut out = Mat::zeros(y.rows, y.cols);
        for b in 0..y.rows {
            for i in 0..y.cols {
                let k = b * y.cols + i;
                let h = (y.data[k] - mu[i]) / (sigma[i] + DEFAULT_EPSILON);
                y_hat.data[k] = h;
                z.data[k] = self.alpha[i] * h + self.gamma[i];
                out.data[k] = if z.data[k] >= 0.0 { 1.0 } else { -1.0 };
            }
        }
        let cache = HiddenCache {
            input,
            w,
            y,
            y_hat,
            z,
            mu,
            sigma,
        };
        (out, cache)
    }

    /// Applies the update for this layer and returns the gradient with
    /// respect to its input.
    fn backward(&mut self, c: &HiddenCache, d_out: &Mat, lr: f64, want_dx: bool) -> Option<Mat> {
        let (rows, cols) = (c.y.rows, c.y.cols);
        let n = rows as f64;
        let mut d_alpha = vec![0.0; cols];
        let mut d_gamma = vec![0.0; cols];
        let mut g = Mat::zeros(rows, cols);
        for k in 0..rows * cols {
            let i = k % cols;
            // straight-through sign
            let dz = if c.z.data[k].abs() <= 1.0 {
                d_out.data[k]
            } else {
                0.0
            };
            d_alpha[i] += dz * c.y_hat.data[k];
            d_gamma[i] += dz;
            g.data[k] = dz * self.alpha[i];
        }
        let mut g_mean = vec![0.0; cols];
        let mut g_dev = vec![0.0; cols];
        for b in 0..rows {
            for i in 0..cols {
                let k = b * cols + i;
                g_mean[i] += g.data[k] / n;
                g_dev[i] += g.data[k] * (c.y.data[k] - c.mu[i]);
            }
        }
        let mut dy = Mat::zeros(rows, cols);
        for b in 0..rows {
            for i in 0..cols {
                let k = b * cols + i;
                let s = c.sigma[i] + DEFAULT_EPSILON;
                let mut d = (g.data[k] - g_mean[i]) / s;
                if c.sigma[i] > 0.0 {
                    d -= (c.y.data[k] - c.mu[i]) * g_dev[i] / (s * s * n * c.sigma[i]);
                }
                dy.data[k] = d;
            }
        }
        let (dw, db, dx) = affine_backward(&c.input, &c.w, &dy, want_dx);
        sgd_latent(&mut self.latent, &dw, lr);
        sgd(&mut self.bias, &db, lr);
        sgd(&mut self.alpha, &d_alpha, lr);
        sgd(&mut self.gamma, &d_gamma, lr);
        for i in 0..cols {
            self.running_mu[i] = BN_MOMENTUM * self.running_mu[i] + (1.0 - BN_MOMENTUM) * c.mu[i];
            self.running_sigma[i] =
                BN_MOMENTUM * self.running_sigma[i] + (1.0 - BN_MOMENTUM) * c.sigma[i];
        }
        dx
    }

    fn export(&self) -> InnerBlock {
        InnerBlock {
            weights: binary_rows(&self.latent),
            bias: self.bias.clone(),
            bn: BatchNormParams {
                mu: self.running_mu.clone(),
                sigma: self.running_sigma.clone(),
                alpha: self.alpha.clone(),
                gamma: self.gamma.clone(),
                epsilon: DEFAULT_EPSILON,
            },
        }
    }
}

fn binary_rows(latent: &Mat) -> Vec<Vec<i8>> {
    (0..latent.rows)
        .map(|r| {
            latent
                .row(r)
                .iter()
                .map(|&w| if w >= 0.0 { 1 } else { -1 })
                .collect()
        })
        .collect()
}

fn check_arch(arch: &[usize], dataset: &Dataset) -> Result<()> {
    if arch.len() < 2 || arch.contains(&0) {
        return Err(Error::InvalidInput(format!("bad architecture {arch:?}")));
    }
    if arch[0] != dataset.width * dataset.height {
        return Err(Error::Dimension {
            context: "architecture input width",
            expected: dataset.width * dataset.height,
            got: arch[0],
        });
    }
    if let Some(&l) = dataset.labels.iter().find(|&&l| l >= arch[arch.len() - 1]) {
        return Err(Error::InvalidInput(format!(
            "label {l} has no output class"
        )));
    }
    Ok(())
}

/// Trains a binarised network with latent real weights, sign forward
/// passes and straight-through gradients, minimising softmax cross-entropy
/// with plain SGD. The result is deterministic for a given seed.
pub fn train(dataset: &Dataset, arch: &[usize], config: &TrainConfig) -> Result<BnnModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_arch(arch, dataset)?;
    if config.batch_size == 0 || config.learning_rate.is_nan() || config.learning_rate <= 0.0 {
        return Err(Error::InvalidInput(
            "batch size and learning rate must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let depth = arch.len() - 1;
    let mut hidden: Vec<HiddenLayer> = (0..depth - 1)
        .map(|k| HiddenLayer {
            latent: init_latent(arch[k + 1], arch[k], &mut rng),
            bias: vec![0.0; arch[k + 1]],
            alpha: vec![1.0; arch[k + 1]],
            gamma: vec![0.0; arch[k + 1]],
            running_mu: vec![0.0; arch[k + 1]],
            running_sigma: vec![1.0; arch[k + 1]],
        })
        .collect();
    let classes = arch[depth];
    let mut out_latent = init_latent(classes, arch[depth - 1], &mut rng);
    let mut out_bias = vec![0.0; classes];

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut x = Mat::zeros(batch.len(), arch[0]);
            for (b, &idx) in batch.iter().enumerate() {
                for (d, &v) in x.row_mut(b).iter_mut().zip(&dataset.images[idx]) {
                    *d = v as f64;
                }
            }
            let mut caches = Vec::with_capacity(hidden.len());
            for layer in &hidden {
                let (next, cache) = layer.forward(x);
                caches.push(cache);
                x = next;
            }
            let w_out = out_latent.binarized();
            let mut d_logits = affine(&x, &w_out, &out_bias);
            let n = batch.len() as f64;
            let temperature = loss_temperature(arch[depth - 1]);
            for (b, &idx) in batch.iter().enumerate() {
                let row = d_logits.row_mut(b);
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    *v = ((*v - max) / temperature).exp();
                    total += *v;
                }
                let label = dataset.labels[idx];
                epoch_loss -= (row[label] / total).ln();
                for (c, v) in row.iter_mut().enumerate() {
                    *v = (*v / total - if c == label { 1.0 } else { 0.0 }) / (n * temperature);
                }
            }
            let (dw, db, mut dx) = affine_backward(&x, &w_out, &d_logits, !hidden.is_empty());
            sgd_latent(&mut out_latent, &dw, config.learning_rate);
            sgd(&mut out_bias, &db, config.learning_rate);
            for (k, (layer, cache)) in hidden.iter_mut().zip(&caches).enumerate().rev() {
                let d_out = dx.take().expect("gradient flows to every hidden layer");
                dx = layer.backward(cache, &d_out, config.learning_rate, k > 0);
            }
        }
        let params_finite = out_bias.iter().all(|v| v.is_finite())
            && hidden.iter().all(|l| {
                l.alpha
                    .iter()
                    .chain(&l.gamma)
                    .chain(&l.bias)
                    .all(|v| v.is_finite())
            });
        if !epoch_loss.is_finite() || !params_finite {
            return Err(Error::Training { epoch });
        }
    }

    let model = BnnModel {
        arch: arch.to_vec(),
        inner_blocks: hidden.iter().map(HiddenLayer::export).collect(),
        output_block: OutputBlock {
            weights: binary_rows(&out_latent),
            bias: out_bias,
        },
        image: Some(ImageShape {
            width: dataset.width,
            height: dataset.height,
        }),
    };
    model.validate()?;
    Ok(model)
}

/// Fraction of examples whose reference prediction matches the label.
pub fn evaluate(model: &BnnModel, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for (x, &label) in dataset.images.iter().zip(&dataset.labels) {
        if forward_reference(model, x)?.0 == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}
