//! Fixed-shape fully connected network: `input -> 40 ReLU -> 40 ReLU -> 1`.
//!
//! The scalar output is the pre-activation `f`; the collision probability is
//! `logistic(f)`. Hidden layers carry dropout with the inverted convention:
//! surviving activations are scaled by `1 / keep_prob` on every stochastic pass,
//! so the expected activation matches the mask-free network.
//!
//! All parameters live in one flat buffer ([`MlpParams::data`]) so gradients and
//! Adam moments share a single layout. Weight matrices are stored input-major:
//! the weights fanning out of input unit `k` are contiguous. That makes the
//! forward pass a sum of scaled rows over the *nonzero* inputs, which matters
//! here because camera observations and dropped-out hidden units are mostly 0.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

pub const HIDDEN_WIDTH: usize = 40;

/// Probability floor/ceiling applied before taking logs in the loss.
pub const LOSS_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub input: usize,
    pub hidden: [usize; 2],
}

impl Arch {
    pub fn new(input: usize, hidden1: usize, hidden2: usize) -> Result<Self> {
        ensure!(
            input > 0 && hidden1 > 0 && hidden2 > 0,
            "all layer widths must be positive (got {input}, {hidden1}, {hidden2})"
        );
        Ok(Self {
            input,
            hidden: [hidden1, hidden2],
        })
    }

    /// Two hidden layers of [`HIDDEN_WIDTH`] units.
    pub fn standard(input: usize) -> Result<Self> {
        Self::new(input, HIDDEN_WIDTH, HIDDEN_WIDTH)
    }

    pub fn param_count(&self) -> usize {
        self.offsets().end
    }

    fn offsets(&self) -> Offsets {
        let [h1, h2] = self.hidden;
        let w1 = 0;
        let b1 = w1 + self.input * h1;
        let w2 = b1 + h1;
        let b2 = w2 + h1 * h2;
        let w3 = b2 + h2;
        let b3 = w3 + h2;
        Offsets {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            end: b3 + 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    end: usize,
}

/// Network parameters (or anything shaped like them, e.g. gradients).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    arch: Arch,
    data: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(arch: Arch) -> Self {
        Self {
            arch,
            data: vec![0.0; arch.param_count()],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(arch: Arch, rng: &mut R) -> Self {
        let mut params = Self::zeros(arch);
        let [h1, h2] = arch.hidden;
        for (fan_in, fan_out, range) in [
            (arch.input, h1, params.range(Part::W1)),
            (h1, h2, params.range(Part::W2)),
            (h2, 1, params.range(Part::W3)),
        ] {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            for w in &mut params.data[range] {
                *w = dist.sample(rng);
            }
        }
        params
    }

    pub fn from_flat(arch: Arch, data: Vec<f64>) -> Result<Self> {
        ensure!(
            data.len() == arch.param_count(),
            "parameter buffer has {} values, architecture needs {}",
            data.len(),
            arch.param_count()
        );
        Ok(Self { arch, data })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn range(&self, part: Part) -> std::ops::Range<usize> {
        let o = self.arch.offsets();
        match part {
            Part::W1 => o.w1..o.b1,
            Part::B1 => o.b1..o.w2,
            Part::W2 => o.w2..o.b2,
            Part::B2 => o.b2..o.w3,
            Part::W3 => o.w3..o.b3,
            Part::B3 => o.b3..o.end,
        }
    }

    fn part(&self, part: Part) -> &[f64] {
        &self.data[self.range(part)]
    }

    fn part_mut(&mut self, part: Part) -> &mut [f64] {
        let r = self.range(part);
        &mut self.data[r]
    }

    /// Weight from input `k` to first-hidden unit `i`.
    pub fn w1(&self, k: usize, i: usize) -> f64 {
        self.part(Part::W1)[k * self.arch.hidden[0] + i]
    }

    pub fn set_w1(&mut self, k: usize, i: usize, value: f64) {
        let h1 = self.arch.hidden[0];
        self.part_mut(Part::W1)[k * h1 + i] = value;
    }

    pub fn b1(&self) -> &[f64] {
        self.part(Part::B1)
    }

    /// Weight from first-hidden unit `k` to second-hidden unit `i`.
    pub fn w2(&self, k: usize, i: usize) -> f64 {
        self.part(Part::W2)[k * self.arch.hidden[1] + i]
    }

    pub fn set_w2(&mut self, k: usize, i: usize, value: f64) {
        let h2 = self.arch.hidden[1];
        self.part_mut(Part::W2)[k * h2 + i] = value;
    }

    pub fn b2(&self) -> &[f64] {
        self.part(Part::B2)
    }

    pub fn w3(&self) -> &[f64] {
        self.part(Part::W3)
    }

    pub fn w3_mut(&mut self) -> &mut [f64] {
        self.part_mut(Part::W3)
    }

    pub fn b1_mut(&mut self) -> &mut [f64] {
        self.part_mut(Part::B1)
    }

    pub fn b2_mut(&mut self) -> &mut [f64] {
        self.part_mut(Part::B2)
    }

    pub fn b3(&self) -> f64 {
        self.part(Part::B3)[0]
    }

    pub fn set_b3(&mut self, value: f64) {
        self.part_mut(Part::B3)[0] = value;
    }
}

#[derive(Debug, Clone, Copy)]
enum Part {
    W1,
    B1,
    W2,
    B2,
    W3,
    B3,
}

/// Per-hidden-unit keep flags for one stochastic pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep_prob: f64,
    keep: [Vec<bool>; 2],
}

impl DropoutMask {
    pub fn all_keep(widths: [usize; 2]) -> Self {
        Self {
            keep_prob: 1.0,
            keep: [vec![true; widths[0]], vec![true; widths[1]]],
        }
    }

    pub fn from_flags(keep_prob: f64, layer1: Vec<bool>, layer2: Vec<bool>) -> Result<Self> {
        ensure!(
            keep_prob > 0.0 && keep_prob <= 1.0,
            "keep_prob must lie in (0, 1], got {keep_prob}"
        );
        Ok(Self {
            keep_prob,
            keep: [layer1, layer2],
        })
    }

    pub fn keep_prob(&self) -> f64 {
        self.keep_prob
    }

    pub fn layer(&self, l: usize) -> &[bool] {
        &self.keep[l]
    }

    pub fn widths(&self) -> [usize; 2] {
        [self.keep[0].len(), self.keep[1].len()]
    }

    pub fn kept_fraction(&self) -> f64 {
        let total = self.keep[0].len() + self.keep[1].len();
        let kept = self.keep.iter().flatten().filter(|k| **k).count();
        kept as f64 / total as f64
    }
}

/// Independent Bernoulli(`keep_prob`) flag per hidden unit.
pub fn sample_dropout_mask<R: Rng + ?Sized>(
    rng: &mut R,
    keep_prob: f64,
    widths: [usize; 2],
) -> Result<DropoutMask> {
    ensure!(
        keep_prob > 0.0 && keep_prob <= 1.0,
        "keep_prob must lie in (0, 1], got {keep_prob}"
    );
    let mut draw = |n: usize| -> Vec<bool> {
        (0..n).map(|_| rng.random::<f64>() < keep_prob).collect()
    };
    let layer1 = draw(widths[0]);
    let layer2 = draw(widths[1]);
    Ok(DropoutMask {
        keep_prob,
        keep: [layer1, layer2],
    })
}

/// `1 / (1 + exp(-y))`, evaluated without overflow for large `|y|`.
pub fn logistic(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Activations {
    pub z1: Vec<f64>,
    pub h1: Vec<f64>,
    pub z2: Vec<f64>,
    pub h2: Vec<f64>,
    pub f: f64,
}

/// Adds `Σ_k x_k · W[k, :]` to `acc` for the nonzero entries of `x`, in index order.
/// `w` is input-major with row length `acc.len()`.
#[inline]
fn accumulate_rows(acc: &mut [f64], w: &[f64], x: &[f64]) {
    let n = acc.len();
    for (k, &xk) in x.iter().enumerate() {
        if xk != 0.0 {
            let row = &w[k * n..(k + 1) * n];
            for (a, &wi) in acc.iter_mut().zip(row) {
                *a += xk * wi;
            }
        }
    }
}

/// First-layer pre-activation contributed by the bias and the leading
/// `prefix.len()` inputs.
pub fn first_layer_partial(params: &MlpParams, prefix: &[f64]) -> Result<Vec<f64>> {
    ensure!(
        prefix.len() <= params.arch.input,
        "input prefix of length {} exceeds input width {}",
        prefix.len(),
        params.arch.input
    );
    let mut z1 = params.b1().to_vec();
    accumulate_rows(&mut z1, params.part(Part::W1), prefix);
    Ok(z1)
}

/// Continues a [`first_layer_partial`] with the inputs starting at `offset`.
pub fn first_layer_extend(
    params: &MlpParams,
    z1: &mut [f64],
    offset: usize,
    suffix: &[f64],
) -> Result<()> {
    ensure!(
        offset + suffix.len() <= params.arch.input && z1.len() == params.arch.hidden[0],
        "input suffix [{offset}, {}) does not fit input width {}",
        offset + suffix.len(),
        params.arch.input
    );
    let h1 = params.arch.hidden[0];
    let w1 = &params.part(Part::W1)[offset * h1..];
    accumulate_rows(z1, w1, suffix);
    Ok(())
}

/// Finishes a forward pass from a complete first-layer pre-activation.
pub fn forward_from_first_layer(
    params: &MlpParams,
    z1: &[f64],
    mask: Option<&DropoutMask>,
    out: &mut Activations,
) -> Result<f64> {
    let [h1n, h2n] = params.arch.hidden;
    ensure!(
        z1.len() == h1n,
        "first-layer activation has {} units, expected {h1n}",
        z1.len()
    );
    if let Some(m) = mask {
        ensure!(
            m.widths() == params.arch.hidden,
            "dropout mask widths {:?} do not match hidden widths {:?}",
            m.widths(),
            params.arch.hidden
        );
    }

    out.z1.clear();
    out.z1.extend_from_slice(z1);
    out.h1.clear();
    out.h1.extend(z1.iter().map(|&z| z.max(0.0)));
    if let Some(m) = mask {
        apply_mask(&mut out.h1, &m.keep[0], 1.0 / m.keep_prob);
    }

    out.z2.clear();
    out.z2.extend_from_slice(params.b2());
    accumulate_rows(&mut out.z2, params.part(Part::W2), &out.h1);
    out.h2.clear();
    out.h2.extend(out.z2.iter().map(|&z| z.max(0.0)));
    if let Some(m) = mask {
        apply_mask(&mut out.h2, &m.keep[1], 1.0 / m.keep_prob);
    }
    debug_assert_eq!(out.h2.len(), h2n);

    let mut f = params.b3();
    for (&h, &w) in out.h2.iter().zip(params.w3()) {
        f += h * w;
    }
    out.f = f;
    Ok(f)
}

#[inline]
fn apply_mask(h: &mut [f64], keep: &[bool], scale: f64) {
    for (v, &k) in h.iter_mut().zip(keep) {
        *v = if k { *v * scale } else { 0.0 };
    }
}

fn check_input(params: &MlpParams, input: &[f64]) -> Result<()> {
    ensure!(
        input.len() == params.arch.input,
        "input has length {}, network expects {}",
        input.len(),
        params.arch.input
    );
    Ok(())
}

/// Stochastic forward pass under `mask`; returns `f` and the activations needed
/// by backpropagation.
pub fn forward(
    params: &MlpParams,
    input: &[f64],
    mask: &DropoutMask,
) -> Result<(f64, Activations)> {
    check_input(params, input)?;
    let z1 = first_layer_partial(params, input)?;
    let mut acts = Activations::default();
    let f = forward_from_first_layer(params, &z1, Some(mask), &mut acts)?;
    Ok((f, acts))
}

/// Dropout-free forward pass.
pub fn forward_unmasked(params: &MlpParams, input: &[f64]) -> Result<f64> {
    check_input(params, input)?;
    let z1 = first_layer_partial(params, input)?;
    let mut acts = Activations::default();
    forward_from_first_layer(params, &z1, None, &mut acts)
}

/// Mean binary cross-entropy of `logistic(f)` against the labels, and its exact
/// gradient with respect to every parameter under the given per-example masks.
pub fn loss_and_gradient(
    params: &MlpParams,
    batch: &[(&[f64], f64)],
    masks: &[DropoutMask],
) -> Result<(f64, MlpParams)> {
    ensure!(
        masks.len() == batch.len(),
        "{} dropout masks for a batch of {}",
        masks.len(),
        batch.len()
    );
    backprop(params, batch, Some(masks))
}

/// [`loss_and_gradient`] with no dropout at all.
pub fn loss_and_gradient_unmasked(
    params: &MlpParams,
    batch: &[(&[f64], f64)],
) -> Result<(f64, MlpParams)> {
    backprop(params, batch, None)
}

fn backprop(
    params: &MlpParams,
    batch: &[(&[f64], f64)],
    masks: Option<&[DropoutMask]>,
) -> Result<(f64, MlpParams)> {
    ensure!(!batch.is_empty(), "loss needs a nonempty batch");
    let arch = params.arch;
    let [h1n, h2n] = arch.hidden;
    let mut grads = MlpParams::zeros(arch);
    let mut acts = Activations::default();
    let mut dz2 = vec![0.0; h2n];
    let mut dz1 = vec![0.0; h1n];
    let mut total = 0.0;

    for (idx, &(input, label)) in batch.iter().enumerate() {
        check_input(params, input)?;
        ensure!(
            label == 0.0 || label == 1.0,
            "labels must be 0 or 1, got {label}"
        );
        let mask = masks.map(|m| &m[idx]);
        let z1 = first_layer_partial(params, input)?;
        let f = forward_from_first_layer(params, &z1, mask, &mut acts)?;

        let p = logistic(f);
        let pc = p.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
        total -= label * pc.ln() + (1.0 - label) * (1.0 - pc).ln();
        // Inside the clamp region the loss is flat in f.
        let df = if p == pc { p - label } else { 0.0 };
        if df == 0.0 {
            continue;
        }

        let (scale1, scale2, keep1, keep2) = match mask {
            Some(m) => (
                1.0 / m.keep_prob,
                1.0 / m.keep_prob,
                Some(&m.keep[0]),
                Some(&m.keep[1]),
            ),
            None => (1.0, 1.0, None, None),
        };

        // Output layer.
        for (g, &h) in grads.part_mut(Part::W3).iter_mut().zip(&acts.h2) {
            *g += df * h;
        }
        grads.part_mut(Part::B3)[0] += df;

        // Second hidden layer.
        for i in 0..h2n {
            let kept = keep2.is_none_or(|k| k[i]);
            dz2[i] = if kept && acts.z2[i] > 0.0 {
                let d = df * params.w3()[i];
                if keep2.is_some() {
                    d * scale2
                } else {
                    d
                }
            } else {
                0.0
            };
        }
        {
            let g = grads.part_mut(Part::W2);
            for (k, &h) in acts.h1.iter().enumerate() {
                if h != 0.0 {
                    for (gi, &d) in g[k * h2n..(k + 1) * h2n].iter_mut().zip(&dz2) {
                        *gi += h * d;
                    }
                }
            }
        }
        for (g, &d) in grads.part_mut(Part::B2).iter_mut().zip(&dz2) {
            *g += d;
        }

        // First hidden layer.
        let w2 = params.part(Part::W2);
        for k in 0..h1n {
            let kept = keep1.is_none_or(|m| m[k]);
            dz1[k] = if kept && acts.z1[k] > 0.0 {
                let row = &w2[k * h2n..(k + 1) * h2n];
                let dh: f64 = row.iter().zip(&dz2).map(|(w, d)| w * d).sum();
                if keep1.is_some() {
                    dh * scale1
                } else {
                    dh
                }
            } else {
                0.0
            };
        }
        {
            let g = grads.part_mut(Part::W1);
            for (j, &x) in input.iter().enumerate() {
                if x != 0.0 {
                    for (gi, &d) in g[j * h1n..(j + 1) * h1n].iter_mut().zip(&dz1) {
                        *gi += x * d;
                    }
                }
            }
        }
        for (g, &d) in grads.part_mut(Part::B1).iter_mut().zip(&dz1) {
            *g += d;
        }
    }

    let n = batch.len() as f64;
    for g in &mut grads.data {
        *g /= n;
    }
    Ok((total / n, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(arch: Arch, config: AdamConfig) -> Self {
        let n = arch.param_count();
        Self {
            config,
            step: 0,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update of `params` along `grads`.
pub fn adam_step(state: &mut AdamState, params: &mut MlpParams, grads: &MlpParams) -> Result<()> {
    let n = params.data.len();
    ensure!(
        grads.arch == params.arch
            && state.first_moment.len() == n
            && state.second_moment.len() == n,
        "optimizer, parameter and gradient shapes disagree"
    );
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (((p, &g), m), v) in params
        .data
        .iter_mut()
        .zip(&grads.data)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
