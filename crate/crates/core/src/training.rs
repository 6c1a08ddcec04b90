//! Image-to-text InfoNCE over the toy encoders, its analytic gradient, and a
//! plain gradient-descent loop.
//!
//! For a batch of `B` positive pairs the loss is
//! `mean_a [ logsumexp_b(s_ab / tau) - s_aa / tau ]`, where `s_ab` is the
//! cosine between image `a` and text `b`. The other texts of the batch are the
//! negatives.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{dot, Matrix, ZERO_NORM};
use crate::encoders::EncoderParams;
use crate::error::{check_dim, Error, Result};

/// One positive pair: raw image features and the token ids of its text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub features: Vec<f64>,
    pub token_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub pairs: Vec<Pair>,
}

impl Batch {
    pub fn new(pairs: Vec<Pair>) -> Self {
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub tau: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            lr: 0.05,
            tau: 0.07,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidTau(self.tau));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::ConfigInvalid(format!("lr must be >= 0, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Gradient with the same layout as [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w_vision: Matrix,
    pub token_table: Matrix,
    pub w_text: Matrix,
}

impl Gradients {
    fn zeros_like(p: &EncoderParams) -> Self {
        Self {
            w_vision: Matrix::zeros(p.w_vision.rows(), p.w_vision.cols()),
            token_table: Matrix::zeros(p.token_table.rows(), p.token_table.cols()),
            w_text: Matrix::zeros(p.w_text.rows(), p.w_text.cols()),
        }
    }

    pub fn norm(&self) -> f64 {
        [&self.w_vision, &self.token_table, &self.w_text]
            .iter()
            .flat_map(|m| m.as_slice())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Everything the backward pass needs from the forward pass.
struct Forward {
    /// Unnormalized image projections and their norms.
    image_raw: Vec<Vec<f64>>,
    image_norm: Vec<f64>,
    /// Unnormalized pooled text (mean of token projections) and norms.
    text_raw: Vec<Vec<f64>>,
    text_norm: Vec<f64>,
    /// Row-wise softmax of the logits.
    probs: Vec<Vec<f64>>,
    loss: f64,
}

fn check_inputs(params: &EncoderParams, batch: &Batch, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidTau(tau));
    }
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for p in &batch.pairs {
        check_dim(params.feature_dim(), p.features.len())?;
        if p.token_ids.is_empty() {
            return Err(Error::EmptyInput("token sequence"));
        }
    }
    Ok(())
}

fn norm_checked(x: &[f64]) -> Result<f64> {
    let n = dot(x, x).sqrt();
    if n <= ZERO_NORM {
        Err(Error::ZeroVector)
    } else {
        Ok(n)
    }
}

fn forward(params: &EncoderParams, batch: &Batch, tau: f64) -> Result<Forward> {
    check_inputs(params, batch, tau)?;
    let d = params.embed_dim();
    let mut image_raw = Vec::with_capacity(batch.len());
    let mut image_norm = Vec::with_capacity(batch.len());
    let mut text_raw = Vec::with_capacity(batch.len());
    let mut text_norm = Vec::with_capacity(batch.len());
    for pair in &batch.pairs {
        let u = params.project_image(&pair.features)?;
        image_norm.push(norm_checked(&u)?);
        image_raw.push(u);

        let mut s = vec![0.0; d];
        for &id in &pair.token_ids {
            for (acc, x) in s.iter_mut().zip(params.project_token(id)?) {
                *acc += x;
            }
        }
        let m = pair.token_ids.len() as f64;
        s.iter_mut().for_each(|x| *x /= m);
        text_norm.push(norm_checked(&s)?);
        text_raw.push(s);
    }

    let b = batch.len();
    let mut probs = Vec::with_capacity(b);
    let mut loss = 0.0;
    for a in 0..b {
        let logits: Vec<f64> = (0..b)
            .map(|j| dot(&image_raw[a], &text_raw[j]) / (image_norm[a] * text_norm[j] * tau))
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        loss += max + z.ln() - logits[a];
        probs.push(exps.into_iter().map(|e| e / z).collect());
    }
    Ok(Forward {
        image_raw,
        image_norm,
        text_raw,
        text_norm,
        probs,
        loss: (loss / b as f64).max(0.0),
    })
}

/// Batch-mean image-to-text InfoNCE loss.
pub fn contrastive_loss(params: &EncoderParams, batch: &Batch, tau: f64) -> Result<f64> {
    Ok(forward(params, batch, tau)?.loss)
}

/// Backpropagates through `x -> x / ‖x‖`: `(g - y (y·g)) / ‖x‖` with `y = x / ‖x‖`.
fn through_normalize(raw: &[f64], norm: f64, grad: &[f64]) -> Vec<f64> {
    let y: Vec<f64> = raw.iter().map(|x| x / norm).collect();
    let proj = dot(&y, grad);
    grad.iter().zip(&y).map(|(g, yi)| (g - yi * proj) / norm).collect()
}

/// Analytic gradient of [`contrastive_loss`] with respect to every parameter.
pub fn loss_gradients(params: &EncoderParams, batch: &Batch, tau: f64) -> Result<Gradients> {
    let fwd = forward(params, batch, tau)?;
    Ok(backward(params, batch, tau, &fwd))
}

fn backward(params: &EncoderParams, batch: &Batch, tau: f64, fwd: &Forward) -> Gradients {
    let b = batch.len();
    let d = params.embed_dim();
    let mut grads = Gradients::zeros_like(params);

    let unit = |raw: &[f64], n: f64| raw.iter().map(|x| x / n).collect::<Vec<_>>();
    let v: Vec<Vec<f64>> = (0..b).map(|a| unit(&fwd.image_raw[a], fwd.image_norm[a])).collect();
    let t: Vec<Vec<f64>> = (0..b).map(|j| unit(&fwd.text_raw[j], fwd.text_norm[j])).collect();

    // dL/dlogit_aj = (P_aj - [a == j]) / B; logits are v_a · t_j / tau.
    let scale = 1.0 / (b as f64 * tau);
    let mut dv = vec![vec![0.0; d]; b];
    let mut dt = vec![vec![0.0; d]; b];
    for a in 0..b {
        for j in 0..b {
            let g = (fwd.probs[a][j] - if a == j { 1.0 } else { 0.0 }) * scale;
            if g == 0.0 {
                continue;
            }
            for k in 0..d {
                dv[a][k] += g * t[j][k];
                dt[j][k] += g * v[a][k];
            }
        }
    }

    for (a, pair) in batch.pairs.iter().enumerate() {
        let du = through_normalize(&fwd.image_raw[a], fwd.image_norm[a], &dv[a]);
        for (i, x) in pair.features.iter().enumerate() {
            for (k, g) in du.iter().enumerate() {
                let cur = grads.w_vision.get(i, k);
                grads.w_vision.set(i, k, cur + x * g);
            }
        }

        let ds = through_normalize(&fwd.text_raw[a], fwd.text_norm[a], &dt[a]);
        let m = pair.token_ids.len() as f64;
        let dr: Vec<f64> = ds.iter().map(|g| g / m).collect();
        // r = e · w_text with e = token_table[id]
        let back = params.w_text.right_mul(&dr).expect("w_text is d x d");
        for &id in &pair.token_ids {
            let e = params.token_table.row(id).to_vec();
            for (row, ek) in e.iter().enumerate() {
                for (col, g) in dr.iter().enumerate() {
                    let cur = grads.w_text.get(row, col);
                    grads.w_text.set(row, col, cur + ek * g);
                }
            }
            for (k, g) in back.iter().enumerate() {
                let cur = grads.token_table.get(id, k);
                grads.token_table.set(id, k, cur + g);
            }
        }
    }
    grads
}

fn apply(params: &mut EncoderParams, grads: &Gradients, lr: f64) {
    let pairs = [
        (params.w_vision.as_mut_slice(), grads.w_vision.as_slice()),
        (params.token_table.as_mut_slice(), grads.token_table.as_slice()),
        (params.w_text.as_mut_slice(), grads.w_text.as_slice()),
    ];
    for (w, g) in pairs {
        for (wi, gi) in w.iter_mut().zip(g) {
            *wi -= lr * gi;
        }
    }
}

/// Mean loss over several batches.
pub fn mean_loss(params: &EncoderParams, data: &[Batch], tau: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for b in data {
        total += contrastive_loss(params, b, tau)?;
    }
    Ok(total / data.len() as f64)
}

/// Loss recorded at each step, before that step's update.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTrace(pub Vec<f64>);

impl LossTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (i, l) in self.0.iter().enumerate() {
            let _ = writeln!(out, "{i},{l}");
        }
        out
    }
}

/// Plain gradient descent. Batches are visited in a seeded shuffled order,
/// reshuffled each pass over `data`.
pub fn train_toy(params: &EncoderParams, data: &[Batch], cfg: &TrainConfig) -> Result<(EncoderParams, LossTrace)> {
    cfg.validate()?;
    let mut params = params.clone();
    let mut trace = Vec::with_capacity(cfg.steps);
    if cfg.steps == 0 {
        return Ok((params, LossTrace(trace)));
    }
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    for step in 0..cfg.steps {
        let slot = step % data.len();
        if slot == 0 {
            order = (0..data.len()).collect();
            order.shuffle(&mut rng);
        }
        let batch = &data[order[slot]];
        let fwd = forward(&params, batch, cfg.tau)?;
        trace.push(fwd.loss);
        if cfg.lr > 0.0 {
            let grads = backward(&params, batch, cfg.tau, &fwd);
            apply(&mut params, &grads, cfg.lr);
        }
    }
    Ok((params, LossTrace(trace)))
}
