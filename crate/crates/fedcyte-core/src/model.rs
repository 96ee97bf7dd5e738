//! Small differentiable reference classifiers: multinomial softmax regression
//! and a one-hidden-layer tanh MLP, with analytic parameter gradients.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{CoreError, Result};
use crate::loss::{focal_dloss_dp, focal_loss, FocalConfig, P_FLOOR};
use crate::params::ParamVector;
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    SoftmaxRegression,
    Mlp1h,
}

/// Model architecture description. Parameters live in a flat [`ParamVector`]
/// whose leading `frozen_fraction` of coordinates is marked non-trainable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Hidden width, used by `Mlp1h` only.
    pub hidden_dim: usize,
    /// Fraction of leading coordinates marked non-trainable, in [0, 1).
    pub frozen_fraction: f64,
}

impl ModelSpec {
    pub fn softmax_regression(input_dim: usize, num_classes: usize) -> Self {
        Self {
            kind: ModelKind::SoftmaxRegression,
            input_dim,
            num_classes,
            hidden_dim: 0,
            frozen_fraction: 0.0,
        }
    }

    pub fn mlp(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        Self {
            kind: ModelKind::Mlp1h,
            input_dim,
            num_classes,
            hidden_dim,
            frozen_fraction: 0.5,
        }
    }

    pub fn with_frozen_fraction(mut self, frac: f64) -> Self {
        self.frozen_fraction = frac;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes == 0 {
            return Err(CoreError::InvalidConfig(alloc::format!(
                "input_dim and num_classes must be positive, got {} and {}",
                self.input_dim,
                self.num_classes
            )));
        }
        if self.kind == ModelKind::Mlp1h && self.hidden_dim == 0 {
            return Err(CoreError::InvalidConfig(alloc::string::String::from(
                "Mlp1h requires hidden_dim >= 1",
            )));
        }
        if !(0.0..1.0).contains(&self.frozen_fraction) {
            return Err(CoreError::InvalidConfig(alloc::format!(
                "frozen_fraction must be in [0, 1), got {}",
                self.frozen_fraction
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            ModelKind::SoftmaxRegression => self.input_dim * self.num_classes + self.num_classes,
            ModelKind::Mlp1h => {
                self.input_dim * self.hidden_dim
                    + self.hidden_dim
                    + self.hidden_dim * self.num_classes
                    + self.num_classes
            }
        }
    }

    /// Length of the frozen prefix: `floor(frozen_fraction * param_count)`.
    pub fn frozen_prefix_len(&self) -> usize {
        (self.frozen_fraction * self.param_count() as f64) as usize
    }
}

/// Deterministic Glorot-uniform initialization (biases zero) for the given
/// spec; the same seed always yields a bitwise-identical vector.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Result<ParamVector> {
    spec.validate()?;
    let mut rng = rng_from(seed);
    let mut values = Vec::with_capacity(spec.param_count());
    match spec.kind {
        ModelKind::SoftmaxRegression => {
            push_glorot_layer(&mut values, &mut rng, spec.input_dim, spec.num_classes);
        }
        ModelKind::Mlp1h => {
            push_glorot_layer(&mut values, &mut rng, spec.input_dim, spec.hidden_dim);
            push_glorot_layer(&mut values, &mut rng, spec.hidden_dim, spec.num_classes);
        }
    }
    let frozen = spec.frozen_prefix_len();
    let mask: Vec<bool> = (0..values.len()).map(|i| i >= frozen).collect();
    ParamVector::new(values, mask)
}

fn push_glorot_layer(values: &mut Vec<f64>, rng: &mut impl RngCore, fan_in: usize, fan_out: usize) {
    let s = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    for _ in 0..fan_in * fan_out {
        values.push(uniform_signed(rng) * s);
    }
    for _ in 0..fan_out {
        values.push(0.0);
    }
}

/// Uniform in [-1, 1) from 53 random bits.
fn uniform_signed(rng: &mut impl RngCore) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * u - 1.0
}

/// Softmax class probabilities for one feature vector.
pub fn forward(spec: &ModelSpec, w: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    let (probs, _) = forward_cached(spec, w, x)?;
    Ok(probs)
}

struct ForwardCache {
    hidden: Vec<f64>,
}

fn forward_cached(spec: &ModelSpec, w: &ParamVector, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    if x.len() != spec.input_dim {
        return Err(CoreError::DimensionMismatch {
            expected: spec.input_dim,
            actual: x.len(),
        });
    }
    if w.len() != spec.param_count() {
        return Err(CoreError::DimensionMismatch {
            expected: spec.param_count(),
            actual: w.len(),
        });
    }
    let v = w.values();
    let c = spec.num_classes;
    let d = spec.input_dim;
    match spec.kind {
        ModelKind::SoftmaxRegression => {
            let mut logits = vec![0.0; c];
            for (k, logit) in logits.iter_mut().enumerate() {
                let row = &v[k * d..(k + 1) * d];
                let mut z = v[c * d + k];
                for (wj, xj) in row.iter().zip(x) {
                    z += wj * xj;
                }
                *logit = z;
            }
            Ok((softmax(&logits), ForwardCache { hidden: Vec::new() }))
        }
        ModelKind::Mlp1h => {
            let h = spec.hidden_dim;
            let (w1, rest) = v.split_at(h * d);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(c * h);
            let mut hidden = vec![0.0; h];
            for (i, hv) in hidden.iter_mut().enumerate() {
                let mut z = b1[i];
                for (wj, xj) in w1[i * d..(i + 1) * d].iter().zip(x) {
                    z += wj * xj;
                }
                *hv = libm::tanh(z);
            }
            let mut logits = vec![0.0; c];
            for (k, logit) in logits.iter_mut().enumerate() {
                let mut z = b2[k];
                for (wj, hj) in w2[k * h..(k + 1) * h].iter().zip(&hidden) {
                    z += wj * hj;
                }
                *logit = z;
            }
            Ok((softmax(&logits), ForwardCache { hidden }))
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Mean focal loss over the indexed batch and its analytic gradient.
/// Frozen coordinates of the gradient are exactly zero.
pub fn loss_and_grad(
    spec: &ModelSpec,
    w: &ParamVector,
    ds: &LabeledDataset,
    indices: &[usize],
    cfg: &FocalConfig,
) -> Result<(f64, ParamVector)> {
    if indices.is_empty() {
        return Err(CoreError::EmptyInput("loss_and_grad batch"));
    }
    if cfg.alpha.len() != spec.num_classes {
        return Err(CoreError::DimensionMismatch {
            expected: spec.num_classes,
            actual: cfg.alpha.len(),
        });
    }
    let mut grad = vec![0.0; w.len()];
    let mut loss_sum = 0.0;
    let scale = 1.0 / indices.len() as f64;
    for &idx in indices {
        let x = ds.feature(idx);
        let y = ds.label(idx);
        if y >= spec.num_classes {
            return Err(CoreError::LabelOutOfRange {
                label: y,
                num_classes: spec.num_classes,
            });
        }
        let (probs, cache) = forward_cached(spec, w, x)?;
        loss_sum += focal_loss(&probs, y, cfg)?;

        // dL/dz_k = dL/dp_t * p_t * (1[k=y] - p_k)
        let pt = probs[y].max(P_FLOOR);
        let dldp = focal_dloss_dp(pt, cfg.alpha[y], cfg.gamma);
        let dz: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(k, &pk)| scale * dldp * pt * ((k == y) as u8 as f64 - pk))
            .collect();
        backprop_sample(spec, w, x, &cache, &dz, &mut grad);
    }
    for (g, &t) in grad.iter_mut().zip(w.trainable_mask()) {
        if !t {
            *g = 0.0;
        }
    }
    let grad = ParamVector::new(grad, w.trainable_mask().to_vec())?;
    Ok((loss_sum * scale, grad))
}

fn backprop_sample(
    spec: &ModelSpec,
    w: &ParamVector,
    x: &[f64],
    cache: &ForwardCache,
    dz: &[f64],
    grad: &mut [f64],
) {
    let c = spec.num_classes;
    let d = spec.input_dim;
    match spec.kind {
        ModelKind::SoftmaxRegression => {
            for (k, &dzk) in dz.iter().enumerate() {
                for (j, &xj) in x.iter().enumerate() {
                    grad[k * d + j] += dzk * xj;
                }
                grad[c * d + k] += dzk;
            }
        }
        ModelKind::Mlp1h => {
            let h = spec.hidden_dim;
            let v = w.values();
            let w2 = &v[h * d + h..h * d + h + c * h];
            let hidden = &cache.hidden;
            let w2_off = h * d + h;
            let b2_off = w2_off + c * h;
            for (k, &dzk) in dz.iter().enumerate() {
                for (i, &hi) in hidden.iter().enumerate() {
                    grad[w2_off + k * h + i] += dzk * hi;
                }
                grad[b2_off + k] += dzk;
            }
            for (i, &hi) in hidden.iter().enumerate() {
                let mut dh = 0.0;
                for (k, &dzk) in dz.iter().enumerate() {
                    dh += dzk * w2[k * h + i];
                }
                let dpre = dh * (1.0 - hi * hi);
                for (j, &xj) in x.iter().enumerate() {
                    grad[i * d + j] += dpre * xj;
                }
                grad[h * d + i] += dpre;
            }
        }
    }
}
