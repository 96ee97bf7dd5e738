//! End-to-end paradigms: federated rounds with a chosen aggregation strategy,
//! independent per-client local training, and centralized training with
//! k-fold cross-validation.
//!
//! Only [`ClientUpdate`] values ever cross the client/server boundary; raw
//! samples stay inside the trainer calls.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::aggregation::{
    fedavg, fedmedian, fedopt_step, fedprox_aggregate, AggregationStrategy, ClientUpdate,
    ServerOptState,
};
use crate::data::{LabeledDataset, SplitSet};
use crate::error::{CoreError, Result};
use crate::loss::FocalConfig;
use crate::metrics::{evaluate, MetricsReport};
use crate::model::{init_params, ModelSpec};
use crate::params::ParamVector;
use crate::seed::derive_seed;
use crate::trainer::{local_train, TrainerConfig};

/// One training institution: a name plus its four-way data split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientData {
    pub name: String,
    pub split: SplitSet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub strategy: AggregationStrategy,
    pub rounds: usize,
    pub trainer: TrainerConfig,
    /// Centralized cross-validation folds.
    pub kfold: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.trainer.validate()?;
        if self.rounds == 0 {
            return Err(CoreError::InvalidConfig(String::from("rounds must be >= 1")));
        }
        if self.kfold < 2 {
            return Err(CoreError::InvalidConfig(String::from("kfold must be >= 2")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// (client name, metrics of the current global model on that client's
    /// validation split).
    pub per_client: Vec<(String, MetricsReport)>,
    /// Metrics of the current global model on the pooled global-test buckets.
    pub global_test: MetricsReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub final_params: ParamVector,
    pub per_round: Vec<RoundRecord>,
    pub combined_test: MetricsReport,
    pub holdout_test: Option<MetricsReport>,
}

fn pooled_global_test(clients: &[ClientData]) -> Result<LabeledDataset> {
    let parts: Vec<&LabeledDataset> = clients.iter().map(|c| &c.split.global_test).collect();
    LabeledDataset::concat(&parts)
}

fn client_trainer_cfg(base: &TrainerConfig, strategy: &AggregationStrategy, seed: u64) -> TrainerConfig {
    let mut cfg = *base;
    cfg.seed = seed;
    if let AggregationStrategy::FedProx { mu } = strategy {
        cfg.prox_mu = *mu;
    }
    cfg
}

/// Synchronous federated training.
///
/// Per-(client, round) seeds come from a stable hash of the master seed, so
/// the result is independent of client scheduling order.
pub fn run_federated(
    cfg: &ExperimentConfig,
    clients: &[ClientData],
    holdout: Option<&LabeledDataset>,
) -> Result<RunResult> {
    cfg.validate()?;
    if clients.is_empty() {
        return Err(CoreError::EmptyInput("run_federated clients"));
    }
    let pooled = pooled_global_test(clients)?;
    let focal: Vec<FocalConfig> = clients
        .iter()
        .map(|c| {
            let counts = padded_counts(&c.split.train, cfg.model.num_classes)?;
            FocalConfig::from_counts(&counts)
        })
        .collect::<Result<_>>()?;

    let mut w = init_params(&cfg.model, derive_seed(cfg.master_seed, "init", 0))?;
    let mut opt_state = ServerOptState::fresh(&w);
    let mut per_round = Vec::with_capacity(cfg.rounds);

    for round in 1..=cfg.rounds {
        let updates: Vec<ClientUpdate> = clients
            .iter()
            .zip(&focal)
            .map(|(client, focal)| {
                let tc = client_trainer_cfg(
                    &cfg.trainer,
                    &cfg.strategy,
                    derive_seed(cfg.master_seed, &client.name, round as u64),
                );
                local_train(&cfg.model, &client.name, &w, &client.split.train, &tc, focal)
            })
            .collect::<Result<_>>()?;

        w = match &cfg.strategy {
            AggregationStrategy::FedAvg => fedavg(&updates)?,
            AggregationStrategy::FedProx { .. } => fedprox_aggregate(&updates)?,
            AggregationStrategy::FedMedian(mcfg) => fedmedian(&updates, mcfg)?,
            AggregationStrategy::FedOpt(ocfg) => {
                let (next, state) = fedopt_step(&w, &updates, &opt_state, ocfg)?;
                opt_state = state;
                next
            }
        };

        let per_client = clients
            .iter()
            .map(|c| Ok((c.name.clone(), evaluate(&cfg.model, &w, &c.split.validation)?)))
            .collect::<Result<Vec<_>>>()?;
        per_round.push(RoundRecord {
            round,
            per_client,
            global_test: evaluate(&cfg.model, &w, &pooled)?,
        });
    }

    let combined_test = evaluate(&cfg.model, &w, &pooled)?;
    let holdout_test = holdout.map(|h| evaluate(&cfg.model, &w, h)).transpose()?;
    Ok(RunResult {
        final_params: w,
        per_round,
        combined_test,
        holdout_test,
    })
}

/// Class counts of a training split, padded/validated to the model's class count.
fn padded_counts(ds: &LabeledDataset, num_classes: usize) -> Result<Vec<u64>> {
    let mut counts = ds.class_counts();
    if counts.len() > num_classes {
        return Err(CoreError::DimensionMismatch {
            expected: num_classes,
            actual: counts.len(),
        });
    }
    counts.resize(num_classes, 0);
    Ok(counts)
}

/// Independent per-client training under the same total epoch budget.
///
/// Each client trains `rounds` segments of `local_epochs`, with the same
/// per-(client, round) seeds as the federated run. With one client and
/// FedAvg, the federated run is therefore bitwise identical to this one.
pub fn run_local(
    cfg: &ExperimentConfig,
    clients: &[ClientData],
    holdout: Option<&LabeledDataset>,
) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    if clients.is_empty() {
        return Err(CoreError::EmptyInput("run_local clients"));
    }
    let pooled = pooled_global_test(clients)?;

    clients
        .iter()
        .map(|client| {
            let counts = padded_counts(&client.split.train, cfg.model.num_classes)?;
            let focal = FocalConfig::from_counts(&counts)?;
            let mut w = init_params(&cfg.model, derive_seed(cfg.master_seed, "init", 0))?;
            let mut per_round = Vec::with_capacity(cfg.rounds);
            for round in 1..=cfg.rounds {
                let tc = client_trainer_cfg(
                    &cfg.trainer,
                    &AggregationStrategy::FedAvg,
                    derive_seed(cfg.master_seed, &client.name, round as u64),
                );
                let update =
                    local_train(&cfg.model, &client.name, &w, &client.split.train, &tc, &focal)?;
                w = update.params;
                per_round.push(RoundRecord {
                    round,
                    per_client: alloc::vec![(
                        client.name.clone(),
                        evaluate(&cfg.model, &w, &client.split.validation)?
                    )],
                    global_test: evaluate(&cfg.model, &w, &pooled)?,
                });
            }
            let combined_test = evaluate(&cfg.model, &w, &pooled)?;
            let holdout_test = holdout.map(|h| evaluate(&cfg.model, &w, h)).transpose()?;
            Ok(RunResult {
                final_params: w,
                per_round,
                combined_test,
                holdout_test,
            })
        })
        .collect()
}

/// Centralized training on the pooled train+validation data with k-fold CV.
/// The reported model is the fold model with the highest fold-validation
/// balanced accuracy (ties break to the lowest fold index).
pub fn run_centralized(
    cfg: &ExperimentConfig,
    clients: &[ClientData],
    holdout: Option<&LabeledDataset>,
) -> Result<RunResult> {
    cfg.validate()?;
    if clients.is_empty() {
        return Err(CoreError::EmptyInput("run_centralized clients"));
    }
    let pooled_test = pooled_global_test(clients)?;
    let parts: Vec<&LabeledDataset> = clients
        .iter()
        .flat_map(|c| [&c.split.train, &c.split.validation])
        .collect();
    let pool = LabeledDataset::concat(&parts)?;
    if pool.len() < cfg.kfold {
        return Err(CoreError::DatasetTooSmall {
            required: cfg.kfold,
            actual: pool.len(),
        });
    }

    let mut order: Vec<usize> = (0..pool.len()).collect();
    crate::data::shuffle(&mut order, derive_seed(cfg.master_seed, "kfold", 0));
    let folds: Vec<Vec<usize>> = (0..cfg.kfold)
        .map(|f| order.iter().copied().skip(f).step_by(cfg.kfold).collect())
        .collect();

    let w_init = init_params(&cfg.model, derive_seed(cfg.master_seed, "init", 0))?;
    // Budget-matched to federated: rounds x local_epochs total epochs.
    let mut fold_trainer = cfg.trainer;
    fold_trainer.local_epochs = cfg.rounds * cfg.trainer.local_epochs;

    let mut best: Option<(usize, f64, ParamVector)> = None;
    let mut per_round = Vec::with_capacity(cfg.kfold);
    for (f, fold) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        let train_ds = pool.subset(&train_idx)?;
        let val_ds = pool.subset(fold)?;
        let counts = padded_counts(&train_ds, cfg.model.num_classes)?;
        let focal = FocalConfig::from_counts(&counts)?;
        let mut tc = fold_trainer;
        tc.seed = derive_seed(cfg.master_seed, "centralized-fold", f as u64);
        let name = alloc::format!("fold{f}");
        let update = local_train(&cfg.model, &name, &w_init, &train_ds, &tc, &focal)?;
        let val_metrics = evaluate(&cfg.model, &update.params, &val_ds)?;
        per_round.push(RoundRecord {
            round: f + 1,
            per_client: alloc::vec![(name, val_metrics.clone())],
            global_test: evaluate(&cfg.model, &update.params, &pooled_test)?,
        });
        let better = match &best {
            None => true,
            Some((_, acc, _)) => val_metrics.balanced_accuracy > *acc,
        };
        if better {
            best = Some((f, val_metrics.balanced_accuracy, update.params));
        }
    }

    let (_, _, w) = best.expect("kfold >= 2 produced fold models");
    let combined_test = evaluate(&cfg.model, &w, &pooled_test)?;
    let holdout_test = holdout.map(|h| evaluate(&cfg.model, &w, h)).transpose()?;
    Ok(RunResult {
        final_params: w,
        per_round,
        combined_test,
        holdout_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::MedianConfig;
    use crate::data::{generate_synthetic, split, ClientProfile, Shift, SyntheticConfig};
    use alloc::string::ToString;
    use alloc::vec;

    fn small_clients(seed: u64) -> Vec<ClientData> {
        let profiles = vec![
            ClientProfile {
                name: "c1".to_string(),
                class_counts: vec![60, 40],
                shift: Shift::identity(3),
            },
            ClientProfile {
                name: "c2".to_string(),
                class_counts: vec![30, 70],
                shift: Shift::identity(3),
            },
        ];
        let cfg = SyntheticConfig {
            dim: 3,
            class_sep: 2.5,
            class_names: vec!["a".to_string(), "b".to_string()],
            seed,
        };
        generate_synthetic(&profiles, &cfg)
            .unwrap()
            .into_iter()
            .zip(profiles)
            .map(|(ds, p)| ClientData {
                name: p.name.clone(),
                split: split(&ds, seed + 1).unwrap(),
            })
            .collect()
    }

    fn base_cfg() -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSpec::softmax_regression(3, 2),
            strategy: AggregationStrategy::FedAvg,
            rounds: 2,
            trainer: TrainerConfig {
                local_epochs: 2,
                ..TrainerConfig::default()
            },
            kfold: 2,
            master_seed: 42,
        }
    }

    #[test]
    fn single_client_fedavg_equals_sequential_local() {
        let clients = small_clients(7);
        let one = &clients[..1];
        let cfg = base_cfg();
        let fed = run_federated(&cfg, one, None).unwrap();
        let local = run_local(&cfg, one, None).unwrap();
        assert_eq!(fed.final_params, local[0].final_params);
    }

    #[test]
    fn zero_learning_rate_freezes_all_strategies() {
        let clients = small_clients(7);
        let mut cfg = base_cfg();
        cfg.trainer.learning_rate = 0.0;
        let init = init_params(&cfg.model, derive_seed(cfg.master_seed, "init", 0)).unwrap();
        for strategy in [
            AggregationStrategy::FedAvg,
            AggregationStrategy::FedMedian(MedianConfig::default()),
            AggregationStrategy::FedProx { mu: 0.01 },
            AggregationStrategy::FedOpt(Default::default()),
        ] {
            cfg.strategy = strategy;
            let r = run_federated(&cfg, &clients, None).unwrap();
            assert_eq!(r.final_params.values(), init.values(), "{}", strategy.name());
        }
    }

    #[test]
    fn federated_run_is_deterministic_and_structured() {
        let clients = small_clients(7);
        let cfg = base_cfg();
        let a = run_federated(&cfg, &clients, None).unwrap();
        let b = run_federated(&cfg, &clients, None).unwrap();
        assert_eq!(a.final_params, b.final_params);
        assert_eq!(a.per_round.len(), cfg.rounds);
        assert_eq!(a.per_round[0].per_client.len(), 2);
        assert!(a.holdout_test.is_none());
    }

    #[test]
    fn federated_ignores_client_order() {
        let clients = small_clients(7);
        let mut reversed = clients.clone();
        reversed.reverse();
        let cfg = base_cfg();
        let a = run_federated(&cfg, &clients, None).unwrap();
        let b = run_federated(&cfg, &reversed, None).unwrap();
        assert_eq!(a.final_params, b.final_params);
    }

    #[test]
    fn local_returns_one_result_per_client_in_order() {
        let clients = small_clients(7);
        let cfg = base_cfg();
        let results = run_local(&cfg, &clients, None).unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(results[0].per_round[0].per_client[0].0, "c1");
        assert_eq!(results[1].per_round[0].per_client[0].0, "c2");
    }

    #[test]
    fn centralized_produces_kfold_models_and_partitioned_folds() {
        let clients = small_clients(7);
        let mut cfg = base_cfg();
        cfg.kfold = 4;
        let r = run_centralized(&cfg, &clients, None).unwrap();
        assert_eq!(r.per_round.len(), 4);
        // fold validation sets partition the pool
        let pool_n: usize = clients
            .iter()
            .map(|c| c.split.train.len() + c.split.validation.len())
            .sum();
        let val_n: usize = r
            .per_round
            .iter()
            .map(|rec| rec.per_client[0].1.support.iter().sum::<u64>() as usize)
            .sum();
        assert_eq!(pool_n, val_n);
    }

    #[test]
    fn holdout_is_evaluated_when_supplied() {
        let clients = small_clients(7);
        let holdout = clients[0].split.local_test.clone();
        let cfg = base_cfg();
        let r = run_federated(&cfg, &clients, Some(&holdout)).unwrap();
        assert!(r.holdout_test.is_some());
    }
}
