//! Focal loss with frequency-derived, clipped per-class alpha weights.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Floor applied to the true-class probability before the log.
pub const P_FLOOR: f64 = 1e-12;

/// Default clipping range for the per-class alpha weights.
pub const ALPHA_CLIP: (f64, f64) = (0.1, 4.0);

/// Default focusing exponent.
pub const DEFAULT_GAMMA: f64 = 2.5;

/// Focal loss configuration: `-(1-p_t)^gamma * alpha[y] * ln(p_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalConfig {
    pub gamma: f64,
    pub alpha: Vec<f64>,
}

impl FocalConfig {
    pub fn new(gamma: f64, alpha: Vec<f64>) -> Result<Self> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(CoreError::InvalidConfig(alloc::format!(
                "gamma must be finite and >= 0, got {gamma}"
            )));
        }
        if alpha.is_empty() {
            return Err(CoreError::EmptyInput("FocalConfig alpha"));
        }
        Ok(Self { gamma, alpha })
    }

    /// Uniform alpha = 1 for every class, configurable gamma.
    pub fn uniform(gamma: f64, num_classes: usize) -> Result<Self> {
        Self::new(gamma, vec![1.0; num_classes])
    }

    /// Default gamma with alphas derived from class counts.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        Self::new(DEFAULT_GAMMA, alpha_weights(counts, ALPHA_CLIP)?)
    }
}

/// Per-class alpha weights: `clip(sqrt(1/f_c), lo, hi)` with `f_c` the class
/// frequency. Classes with zero count get the upper clip bound.
pub fn alpha_weights(class_counts: &[u64], clip: (f64, f64)) -> Result<Vec<f64>> {
    let (lo, hi) = clip;
    let total: u64 = class_counts.iter().sum();
    if total == 0 {
        return Err(CoreError::EmptyInput("alpha_weights: all counts zero"));
    }
    Ok(class_counts
        .iter()
        .map(|&c| {
            if c == 0 {
                hi
            } else {
                let f = c as f64 / total as f64;
                libm::sqrt(1.0 / f).clamp(lo, hi)
            }
        })
        .collect())
}

/// Focal loss for one sample given its predicted class probabilities.
pub fn focal_loss(p: &[f64], label: usize, cfg: &FocalConfig) -> Result<f64> {
    if label >= p.len() {
        return Err(CoreError::LabelOutOfRange {
            label,
            num_classes: p.len(),
        });
    }
    let alpha = cfg.alpha.get(label).copied().ok_or(CoreError::LabelOutOfRange {
        label,
        num_classes: cfg.alpha.len(),
    })?;
    let pt = p[label].max(P_FLOOR);
    Ok(-modulating_factor(pt, cfg.gamma) * alpha * libm::log(pt))
}

/// `(1 - p_t)^gamma`, with the gamma = 0 case pinned to exactly 1.
fn modulating_factor(pt: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else {
        libm::pow((1.0 - pt).max(0.0), gamma)
    }
}

/// Derivative of the focal loss with respect to `p_t`, used by backprop.
///
/// d/dp [-(1-p)^g a ln p] = a g (1-p)^(g-1) ln p - a (1-p)^g / p
pub(crate) fn focal_dloss_dp(pt: f64, alpha: f64, gamma: f64) -> f64 {
    let pt = pt.max(P_FLOOR);
    let one_minus = (1.0 - pt).max(0.0);
    let ce_term = -alpha * modulating_factor(pt, gamma) / pt;
    if gamma == 0.0 {
        ce_term
    } else {
        alpha * gamma * libm::pow(one_minus, gamma - 1.0) * libm::log(pt) + ce_term
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn alpha_single_class() {
        assert_eq!(alpha_weights(&[10], ALPHA_CLIP).unwrap(), vec![1.0]);
    }

    #[test]
    fn alpha_clips_rare_class() {
        // f = 0.01 -> sqrt(100) = 10 -> clipped to 4.0
        let a = alpha_weights(&[1, 99], ALPHA_CLIP).unwrap();
        assert_eq!(a[0], 4.0);
    }

    #[test]
    fn alpha_inside_clip_range() {
        // f = 0.25 -> sqrt(4) = 2
        let a = alpha_weights(&[25, 75], ALPHA_CLIP).unwrap();
        assert!((a[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_zero_count_gets_upper_bound() {
        let a = alpha_weights(&[0, 10], ALPHA_CLIP).unwrap();
        assert_eq!(a[0], 4.0);
    }

    #[test]
    fn alpha_rejects_all_zero() {
        assert!(alpha_weights(&[0, 0], ALPHA_CLIP).is_err());
    }

    #[test]
    fn focal_examples() {
        let ce = FocalConfig::uniform(0.0, 2).unwrap();
        assert_eq!(focal_loss(&[1.0, 0.0], 0, &ce).unwrap(), 0.0);
        let l = focal_loss(&[0.5, 0.5], 0, &ce).unwrap();
        assert!((l - core::f64::consts::LN_2).abs() < 1e-12);

        let focal = FocalConfig::uniform(2.5, 2).unwrap();
        let l = focal_loss(&[0.5, 0.5], 0, &focal).unwrap();
        let expected = libm::pow(0.5, 2.5) * core::f64::consts::LN_2;
        assert!((l - expected).abs() < 1e-12, "got {l}, want {expected}");
    }

    #[test]
    fn focal_rejects_bad_label() {
        let cfg = FocalConfig::uniform(2.5, 2).unwrap();
        assert!(focal_loss(&[0.5, 0.5], 2, &cfg).is_err());
    }

    proptest! {
        #[test]
        fn focal_nonnegative_and_decreasing(pt in 0.001f64..0.999, gamma in 0.0f64..4.0) {
            let cfg = FocalConfig::new(gamma, alloc::vec![1.0, 1.0]).unwrap();
            let l1 = focal_loss(&[pt, 1.0 - pt], 0, &cfg).unwrap();
            let l2 = focal_loss(&[(pt + 1e-4).min(1.0), 0.0], 0, &cfg).unwrap();
            prop_assert!(l1 >= 0.0);
            prop_assert!(l2 <= l1 + 1e-15);
        }

        #[test]
        fn gamma_zero_matches_cross_entropy(pt in 1e-6f64..1.0) {
            let cfg = FocalConfig::uniform(0.0, 2).unwrap();
            let l = focal_loss(&[pt, 1.0 - pt], 0, &cfg).unwrap();
            prop_assert!((l - (-libm::log(pt))).abs() < 1e-12);
        }

        #[test]
        fn alpha_scale_invariant(counts in proptest::collection::vec(1u64..500, 2..6), k in 1u64..20) {
            let base = alpha_weights(&counts, ALPHA_CLIP).unwrap();
            let scaled: alloc::vec::Vec<u64> = counts.iter().map(|c| c * k).collect();
            let scaled_a = alpha_weights(&scaled, ALPHA_CLIP).unwrap();
            for (a, b) in base.iter().zip(&scaled_a) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
