//! Fully connected network: ReLU hidden layers, one sigmoid output, trained
//! with Adam on mean absolute error.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Regressor};
use crate::error::ModelError;

/// Output logits are clamped here so the sigmoid stays strictly inside (0, 1).
const LOGIT_LIMIT: f64 = 36.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Standardize inputs with training mean and deviation.
    pub standardize: bool,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self { hidden: vec![256, 128, 64], epochs: 200, batch_size: 32, adam: AdamConfig::default(), standardize: true }
    }
}

/// `Σ (n_in + 1)·n_out` over consecutive layer sizes.
pub fn parameter_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

/// Parameters are flattened layer by layer: the `n_out × n_in` weight matrix
/// (row per output unit), then the `n_out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
}

struct Scratch {
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-LOGIT_LIMIT, LOGIT_LIMIT);
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    /// He-normal weights (deviation `sqrt(2 / fan_in)`), zero biases, identity
    /// input scaling.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut m = Self::zeros(input_dim, hidden);
        for l in 0..m.n_layers() {
            let (n_in, _) = m.layer_shape(l);
            let (off, n_w) = (m.layer_offset(l), m.layer_weight_count(l));
            let normal = Normal::new(0.0, (2.0 / n_in.max(1) as f64).sqrt()).expect("positive deviation");
            for w in &mut m.params[off..off + n_w] {
                *w = normal.sample(rng);
            }
        }
        m
    }

    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self {
            params: vec![0.0; parameter_count(&sizes)],
            input_mean: vec![0.0; input_dim],
            input_scale: vec![1.0; input_dim],
            sizes,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.sizes[l], self.sizes[l + 1])
    }

    fn layer_weight_count(&self, l: usize) -> usize {
        self.sizes[l] * self.sizes[l + 1]
    }

    fn layer_offset(&self, l: usize) -> usize {
        parameter_count(&self.sizes[..=l])
    }

    pub fn standardize_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.input_mean.iter().zip(&self.input_scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            acts: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
            deltas: self.sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Forward pass on a standardized input; leaves activations in `s`.
    fn forward_into(&self, z: &[f64], s: &mut Scratch) -> f64 {
        s.acts[0].copy_from_slice(z);
        let last = self.n_layers() - 1;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = self.layer_shape(l);
            let off = self.layer_offset(l);
            let (w, b) = self.params[off..off + (n_in + 1) * n_out].split_at(n_in * n_out);
            let (head, tail) = s.acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let v = b[o] + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>();
                out[o] = if l == last { v } else { v.max(0.0) };
            }
        }
        sigmoid(s.acts[last + 1][0])
    }

    /// Adds `scale · ∂|ŷ − y| / ∂θ` into `grad`; returns `|ŷ − y|`.
    fn accumulate(&self, z: &[f64], y: f64, scale: f64, grad: &mut [f64], s: &mut Scratch) -> f64 {
        let yhat = self.forward_into(z, s);
        let r = yhat - y;
        let logit = s.acts[self.n_layers()][0];
        // Subgradient 0 at a zero residual; the clamp is flat beyond the limit.
        if r == 0.0 || logit.abs() >= LOGIT_LIMIT {
            return r.abs();
        }
        let last = self.n_layers() - 1;
        s.deltas[last][0] = r.signum() * scale * yhat * (1.0 - yhat);
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = self.layer_shape(l);
            let off = self.layer_offset(l);
            {
                let delta = &s.deltas[l];
                let input = &s.acts[l];
                let (gw, gb) = grad[off..off + (n_in + 1) * n_out].split_at_mut(n_in * n_out);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                let (lower, upper) = s.deltas.split_at_mut(l);
                let prev = &mut lower[l - 1];
                prev.iter_mut().for_each(|p| *p = 0.0);
                for (o, &d) in upper[0].iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (p, a) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *p += a * d;
                    }
                }
                for (p, &a) in prev.iter_mut().zip(&s.acts[l]) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
        }
        r.abs()
    }

    /// MAE over a batch of raw rows.
    pub fn loss(&self, rows: &[&[f64]], labels: &[f64]) -> f64 {
        let mut s = self.scratch();
        let total: f64 = rows
            .iter()
            .zip(labels)
            .map(|(r, y)| (self.forward_into(&self.standardize_row(r), &mut s) - y).abs())
            .sum();
        total / rows.len() as f64
    }

    /// Batch MAE and its gradient with respect to `params`.
    pub fn loss_and_gradient(&self, rows: &[&[f64]], labels: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut s = self.scratch();
        let scale = 1.0 / rows.len() as f64;
        let total: f64 = rows
            .iter()
            .zip(labels)
            .map(|(r, &y)| self.accumulate(&self.standardize_row(r), y, scale, &mut grad, &mut s))
            .sum();
        (total * scale, grad)
    }
}

impl Regressor for Mlp {
    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut s = self.scratch();
        self.forward_into(&self.standardize_row(row), &mut s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpFit {
    pub model: Mlp,
    /// Mean batch loss of each epoch.
    pub loss_history: Vec<f64>,
    pub initial_mae: f64,
    pub final_mae: f64,
}

pub fn fit_mlp(data: &FeatureMatrix, params: &MlpParams, seed: u64) -> Result<MlpFit, ModelError> {
    let (n, d) = (data.n_rows(), data.n_cols());
    if n == 0 {
        return Err(ModelError::Empty);
    }
    if params.batch_size == 0 || params.hidden.contains(&0) {
        return Err(ModelError::InvalidParam("batch size and hidden widths must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Mlp::new(d, &params.hidden, &mut rng);
    if params.standardize {
        for j in 0..d {
            let mean = (0..n).map(|i| data.get(i, j)).sum::<f64>() / n as f64;
            let var = (0..n).map(|i| (data.get(i, j) - mean).powi(2)).sum::<f64>() / n as f64;
            model.input_mean[j] = mean;
            model.input_scale[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
    }
    let xs: Vec<Vec<f64>> = data.rows().map(|r| model.standardize_row(r)).collect();
    let ys = data.labels();
    let full_mae = |m: &Mlp| {
        let mut s = m.scratch();
        xs.iter().zip(ys).map(|(x, y)| (m.forward_into(x, &mut s) - y).abs()).sum::<f64>() / n as f64
    };
    let initial_mae = full_mae(&model);

    let AdamConfig { learning_rate, beta1, beta2, epsilon } = params.adam;
    let p = model.params.len();
    let (mut m1, mut m2, mut grad) = (vec![0.0; p], vec![0.0; p], vec![0.0; p]);
    let mut scratch = model.scratch();
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_history = Vec::with_capacity(params.epochs);
    let mut t = 0i32;
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(params.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                epoch_loss += model.accumulate(&xs[i], ys[i], scale, &mut grad, &mut scratch);
            }
            t += 1;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            for k in 0..p {
                let g = grad[k];
                m1[k] = beta1 * m1[k] + (1.0 - beta1) * g;
                m2[k] = beta2 * m2[k] + (1.0 - beta2) * g * g;
                model.params[k] -= learning_rate * (m1[k] / c1) / ((m2[k] / c2).sqrt() + epsilon);
            }
        }
        let epoch_loss = epoch_loss / n as f64;
        if !epoch_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        loss_history.push(epoch_loss);
    }
    let final_mae = full_mae(&model);
    if !final_mae.is_finite() {
        return Err(ModelError::NonFiniteLoss { epoch: params.epochs });
    }
    Ok(MlpFit { model, loss_history, initial_mae, final_mae })
}
