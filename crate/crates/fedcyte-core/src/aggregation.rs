//! Server-side aggregation: FedAvg, FedMedian (with IQR outlier filtering),
//! FedProx (server side identical to FedAvg), and FedOpt (server Adam on
//! pseudo-gradients).

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::params::ParamVector;

/// One client's contribution to a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpdate {
    pub client_id: String,
    pub params: ParamVector,
    /// Local training sample count, used as the FedAvg weight.
    pub n: u64,
}

impl ClientUpdate {
    pub fn new(client_id: String, params: ParamVector, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::InvalidConfig(String::from(
                "ClientUpdate requires n >= 1",
            )));
        }
        Ok(Self { client_id, params, n })
    }
}

/// FedMedian knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianConfig {
    pub iqr_filter: bool,
    pub iqr_k: f64,
}

impl Default for MedianConfig {
    fn default() -> Self {
        Self {
            iqr_filter: true,
            iqr_k: 1.5,
        }
    }
}

/// FedOpt (server Adam) knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FedOptConfig {
    pub server_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub tau: f64,
}

impl Default for FedOptConfig {
    fn default() -> Self {
        Self {
            server_lr: 0.01,
            beta1: 0.9,
            beta2: 0.99,
            tau: 1e-3,
        }
    }
}

/// Tagged selection of the server aggregation rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AggregationStrategy {
    FedAvg,
    FedMedian(MedianConfig),
    /// The proximal coefficient applied inside each client's local objective;
    /// the server side is identical to FedAvg.
    FedProx { mu: f64 },
    FedOpt(FedOptConfig),
}

impl AggregationStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            AggregationStrategy::FedAvg => "FedAvg",
            AggregationStrategy::FedMedian(_) => "FedMedian",
            AggregationStrategy::FedProx { .. } => "FedProx",
            AggregationStrategy::FedOpt(_) => "FedOpt",
        }
    }
}

/// Adam moment estimates threaded across FedOpt rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerOptState {
    pub m: ParamVector,
    pub v: ParamVector,
    pub step: u64,
}

impl ServerOptState {
    pub fn fresh(like: &ParamVector) -> Self {
        Self {
            m: like.zeros_like(),
            v: like.zeros_like(),
            step: 0,
        }
    }
}

fn check_updates(updates: &[ClientUpdate]) -> Result<usize> {
    let first = updates.first().ok_or(CoreError::EmptyInput("aggregation updates"))?;
    let len = first.params.len();
    for u in updates {
        if u.params.len() != len {
            return Err(CoreError::DimensionMismatch {
                expected: len,
                actual: u.params.len(),
            });
        }
    }
    Ok(len)
}

/// Sample-size-weighted mean of client parameters.
pub fn fedavg(updates: &[ClientUpdate]) -> Result<ParamVector> {
    let len = check_updates(updates)?;
    let total: u64 = updates.iter().map(|u| u.n).sum();
    let mut out = updates[0].params.zeros_like();
    for u in updates {
        let w = u.n as f64 / total as f64;
        for (o, &p) in out.values_mut().iter_mut().zip(u.params.values()) {
            *o += w * p;
        }
    }
    debug_assert_eq!(out.len(), len);
    Ok(out)
}

/// Server side of FedProx: identical to [`fedavg`]; the proximal term lives in
/// the client trainer.
pub fn fedprox_aggregate(updates: &[ClientUpdate]) -> Result<ParamVector> {
    fedavg(updates)
}

/// Unweighted coordinate-wise median, optionally after dropping whole updates
/// whose distance to the coordinate-wise mean falls outside the Tukey fences
/// `[Q1 - k*IQR, Q3 + k*IQR]`. Filtering needs at least 4 updates and never
/// drops below 2 survivors.
pub fn fedmedian(updates: &[ClientUpdate], cfg: &MedianConfig) -> Result<ParamVector> {
    check_updates(updates)?;
    let survivors: Vec<&ClientUpdate> = if cfg.iqr_filter && updates.len() >= 4 {
        iqr_survivors(updates, cfg.iqr_k)
    } else {
        updates.iter().collect()
    };

    let mut out = updates[0].params.zeros_like();
    let mut column: Vec<f64> = Vec::with_capacity(survivors.len());
    for (coord, o) in out.values_mut().iter_mut().enumerate() {
        column.clear();
        column.extend(survivors.iter().map(|u| u.params.values()[coord]));
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite params"));
        let mid = column.len() / 2;
        *o = if column.len() % 2 == 0 {
            (column[mid - 1] + column[mid]) / 2.0
        } else {
            column[mid]
        };
    }
    Ok(out)
}

fn iqr_survivors<'a>(updates: &'a [ClientUpdate], k: f64) -> Vec<&'a ClientUpdate> {
    let mean = unweighted_mean(updates);
    let distances: Vec<f64> = updates
        .iter()
        .map(|u| {
            libm::sqrt(
                u.params
                    .values()
                    .iter()
                    .zip(&mean)
                    .map(|(&p, &m)| (p - m) * (p - m))
                    .sum(),
            )
        })
        .collect();
    let mut sorted = distances.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let (q1, q3) = quartiles(&sorted);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - k * iqr, q3 + k * iqr);
    let keep: Vec<&ClientUpdate> = updates
        .iter()
        .zip(&distances)
        .filter(|(_, &d)| d >= lo && d <= hi)
        .map(|(u, _)| u)
        .collect();
    if keep.len() >= 2 {
        keep
    } else {
        // keep the two updates closest to the mean
        let mut order: Vec<usize> = (0..updates.len()).collect();
        order.sort_by(|&a, &b| distances[a].partial_cmp(&distances[b]).expect("finite"));
        order.iter().take(2).map(|&i| &updates[i]).collect()
    }
}

fn unweighted_mean(updates: &[ClientUpdate]) -> Vec<f64> {
    let len = updates[0].params.len();
    let mut mean = alloc::vec![0.0; len];
    for u in updates {
        for (m, &p) in mean.iter_mut().zip(u.params.values()) {
            *m += p;
        }
    }
    let scale = 1.0 / updates.len() as f64;
    for m in &mut mean {
        *m *= scale;
    }
    mean
}

/// Tukey hinges: medians of the lower and upper halves of the sorted data.
fn quartiles(sorted: &[f64]) -> (f64, f64) {
    let n = sorted.len();
    let half = n / 2;
    let lower = &sorted[..half + n % 2];
    let upper = &sorted[n - (half + n % 2)..];
    (median_of_sorted(lower), median_of_sorted(upper))
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

/// One server Adam step on the pseudo-gradient `delta = fedavg(updates) - w_prev`.
/// Frozen coordinates are left untouched.
pub fn fedopt_step(
    w_prev: &ParamVector,
    updates: &[ClientUpdate],
    state: &ServerOptState,
    cfg: &FedOptConfig,
) -> Result<(ParamVector, ServerOptState)> {
    check_updates(updates)?;
    if state.m.len() != w_prev.len() || state.v.len() != w_prev.len() {
        return Err(CoreError::DimensionMismatch {
            expected: w_prev.len(),
            actual: state.m.len(),
        });
    }
    let avg = fedavg(updates)?;
    if avg.len() != w_prev.len() {
        return Err(CoreError::DimensionMismatch {
            expected: w_prev.len(),
            actual: avg.len(),
        });
    }

    let step = state.step + 1;
    let bc1 = 1.0 - libm::pow(cfg.beta1, step as f64);
    let bc2 = 1.0 - libm::pow(cfg.beta2, step as f64);

    let mut m = state.m.clone();
    let mut v = state.v.clone();
    let mut w_next = w_prev.clone();
    for i in 0..w_prev.len() {
        if !w_prev.trainable_mask()[i] {
            continue;
        }
        let delta = avg.values()[i] - w_prev.values()[i];
        let mi = cfg.beta1 * m.values()[i] + (1.0 - cfg.beta1) * delta;
        let vi = cfg.beta2 * v.values()[i] + (1.0 - cfg.beta2) * delta * delta;
        m.values_mut()[i] = mi;
        v.values_mut()[i] = vi;
        let m_hat = mi / bc1;
        let v_hat = vi / bc2;
        w_next.values_mut()[i] += cfg.server_lr * m_hat / (libm::sqrt(v_hat) + cfg.tau);
    }
    Ok((w_next, ServerOptState { m, v, step }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn upd(id: &str, values: &[f64], n: u64) -> ClientUpdate {
        ClientUpdate::new(
            id.to_string(),
            ParamVector::from_values(values.to_vec()).unwrap(),
            n,
        )
        .unwrap()
    }

    #[test]
    fn fedavg_single_client_identity() {
        let u = upd("a", &[1.0, -2.0, 3.5], 7);
        assert_eq!(fedavg(&[u.clone()]).unwrap().values(), u.params.values());
    }

    #[test]
    fn fedavg_weighted_example() {
        let updates = vec![upd("a", &[0.0, 0.0], 1), upd("b", &[4.0, 8.0], 3)];
        assert_eq!(fedavg(&updates).unwrap().values(), &[3.0, 6.0]);
    }

    #[test]
    fn fedavg_rejects_empty_and_mismatch() {
        assert!(fedavg(&[]).is_err());
        let updates = vec![upd("a", &[1.0], 1), upd("b", &[1.0, 2.0], 1)];
        assert!(fedavg(&updates).is_err());
    }

    #[test]
    fn fedmedian_odd_example() {
        let updates = vec![
            upd("a", &[1.0, 5.0], 1),
            upd("b", &[2.0, 4.0], 1),
            upd("c", &[9.0, 0.0], 1),
        ];
        let cfg = MedianConfig::default();
        assert_eq!(fedmedian(&updates, &cfg).unwrap().values(), &[2.0, 4.0]);
    }

    #[test]
    fn fedmedian_even_midpoint() {
        let updates = vec![upd("a", &[1.0, 5.0], 1), upd("b", &[3.0, 7.0], 1)];
        let cfg = MedianConfig::default();
        assert_eq!(fedmedian(&updates, &cfg).unwrap().values(), &[2.0, 6.0]);
    }

    #[test]
    fn fedmedian_iqr_filter_drops_byzantine_update() {
        let mut updates: Vec<ClientUpdate> = (0..4)
            .map(|i| upd(&alloc::format!("h{i}"), &[1.0 + 0.01 * i as f64, 1.0 - 0.01 * i as f64], 1))
            .collect();
        updates.push(upd("byz", &[1e6, 1e6], 1));
        let out = fedmedian(&updates, &MedianConfig::default()).unwrap();
        for &v in out.values() {
            assert!((0.9..=1.1).contains(&v), "coordinate {v} escaped honest box");
        }
    }

    #[test]
    fn fedprox_matches_fedavg() {
        let updates = vec![upd("a", &[1.5, -0.25], 2), upd("b", &[-3.0, 4.0], 5)];
        assert_eq!(
            fedprox_aggregate(&updates).unwrap(),
            fedavg(&updates).unwrap()
        );
    }

    #[test]
    fn fedopt_zero_delta_is_identity() {
        let w = ParamVector::from_values(vec![0.5, -1.0]).unwrap();
        let updates = vec![ClientUpdate::new("a".to_string(), w.clone(), 3).unwrap()];
        let state = ServerOptState::fresh(&w);
        let (next, state) = fedopt_step(&w, &updates, &state, &FedOptConfig::default()).unwrap();
        assert_eq!(next.values(), w.values());
        assert_eq!(state.step, 1);
    }

    #[test]
    fn fedopt_constant_delta_matches_closed_form() {
        let w = ParamVector::from_values(vec![0.0, 0.0, 0.0]).unwrap();
        let c = 0.3;
        let shifted = ParamVector::from_values(vec![c; 3]).unwrap();
        let updates = vec![ClientUpdate::new("a".to_string(), shifted, 1).unwrap()];
        let cfg = FedOptConfig::default();
        let (next, _) = fedopt_step(&w, &updates, &ServerOptState::fresh(&w), &cfg).unwrap();
        // fresh state, step 1: m_hat = c, v_hat = c^2
        let expected = cfg.server_lr * c / (libm::sqrt(c * c) + cfg.tau);
        for &v in next.values() {
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn fedopt_server_lr_zero_is_identity() {
        let w = ParamVector::from_values(vec![1.0, 2.0]).unwrap();
        let updates = vec![upd("a", &[5.0, -5.0], 1)];
        let cfg = FedOptConfig {
            server_lr: 0.0,
            ..FedOptConfig::default()
        };
        let (next, _) = fedopt_step(&w, &updates, &ServerOptState::fresh(&w), &cfg).unwrap();
        assert_eq!(next.values(), w.values());
    }

    #[test]
    fn fedopt_skips_frozen_coordinates() {
        let w = ParamVector::new(vec![1.0, 1.0], vec![false, true]).unwrap();
        let u = ClientUpdate::new(
            "a".to_string(),
            ParamVector::new(vec![2.0, 2.0], vec![false, true]).unwrap(),
            1,
        )
        .unwrap();
        let (next, _) =
            fedopt_step(&w, &[u], &ServerOptState::fresh(&w), &FedOptConfig::default()).unwrap();
        assert_eq!(next.values()[0], 1.0);
        assert!(next.values()[1] > 1.0);
    }

    proptest! {
        #[test]
        fn fedavg_is_convex_combination(
            cols in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 2..6),
            ns in proptest::collection::vec(1u64..20, 6),
        ) {
            let updates: Vec<ClientUpdate> = cols
                .iter()
                .enumerate()
                .map(|(i, c)| upd(&alloc::format!("c{i}"), c, ns[i]))
                .collect();
            let out = fedavg(&updates).unwrap();
            for coord in 0..3 {
                let lo = updates.iter().map(|u| u.params.values()[coord]).fold(f64::INFINITY, f64::min);
                let hi = updates.iter().map(|u| u.params.values()[coord]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(out.values()[coord] >= lo - 1e-12 && out.values()[coord] <= hi + 1e-12);
            }
        }

        #[test]
        fn aggregators_ignore_client_order(
            cols in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 4), 3..7),
            ns in proptest::collection::vec(1u64..10, 7),
        ) {
            let updates: Vec<ClientUpdate> = cols
                .iter()
                .enumerate()
                .map(|(i, c)| upd(&alloc::format!("c{i}"), c, ns[i]))
                .collect();
            let mut reversed = updates.clone();
            reversed.reverse();
            let a = fedavg(&updates).unwrap();
            let b = fedavg(&reversed).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let cfg = MedianConfig { iqr_filter: false, iqr_k: 1.5 };
            prop_assert_eq!(fedmedian(&updates, &cfg).unwrap(), fedmedian(&reversed, &cfg).unwrap());
        }

        #[test]
        fn fedavg_scale_equivariant(
            cols in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 2..5),
            a in -3.0f64..3.0,
        ) {
            let updates: Vec<ClientUpdate> = cols
                .iter()
                .enumerate()
                .map(|(i, c)| upd(&alloc::format!("c{i}"), c, (i + 1) as u64))
                .collect();
            let scaled: Vec<ClientUpdate> = updates
                .iter()
                .map(|u| {
                    let vals: Vec<f64> = u.params.values().iter().map(|v| a * v).collect();
                    upd(&u.client_id, &vals, u.n)
                })
                .collect();
            let base = fedavg(&updates).unwrap();
            let out = fedavg(&scaled).unwrap();
            for (x, y) in base.values().iter().zip(out.values()) {
                prop_assert!((a * x - y).abs() < 1e-12);
            }
        }
    }
}
