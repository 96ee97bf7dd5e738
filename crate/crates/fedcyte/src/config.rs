//! Experiment configuration: a fail-closed TOML document (unknown keys are
//! errors) plus built-in presets. Resolution materializes every default so
//! the results document alone reproduces a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fedcyte_core::aggregation::{FedOptConfig, MedianConfig};
use fedcyte_core::data::{ClientProfile, Shift, SyntheticConfig};
use fedcyte_core::{profiles, AggregationStrategy, ModelSpec, TrainerConfig};

use crate::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    Federated,
    Local,
    Centralized,
}

// ---------------------------------------------------------------------------
// generate

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateFile {
    pub generate: GenerateCfg,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateCfg {
    /// Built-in profile set; currently "paper-table1".
    pub preset: Option<String>,
    /// Count scale for the preset (1.0 or 0.1 ship with the preset).
    pub scale: Option<f64>,
    pub dim: Option<usize>,
    pub class_sep: Option<f64>,
    pub seed: Option<u64>,
    pub class_names: Option<Vec<String>>,
    #[serde(default)]
    pub profiles: Vec<ProfileCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileCfg {
    pub name: String,
    pub class_counts: Vec<u64>,
    pub scale: Option<Vec<f64>>,
    pub offset: Option<Vec<f64>>,
    pub rotation_seed: Option<u64>,
}

/// A fully resolved generation plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratePlan {
    pub synthetic: SyntheticConfig,
    pub profiles: Vec<ClientProfile>,
}

impl GenerateCfg {
    pub fn resolve(&self, seed_override: Option<u64>) -> AppResult<GeneratePlan> {
        let seed = seed_override.or(self.seed).unwrap_or(42);
        let dim = self.dim.unwrap_or(profiles::BENCH_DIM);
        let class_sep = self.class_sep.unwrap_or(profiles::BENCH_CLASS_SEP);
        match (&self.preset, self.profiles.is_empty()) {
            (Some(name), true) => {
                if name != "paper-table1" {
                    return Err(AppError::config(format!("unknown generate preset '{name}'")));
                }
                let scale = self.scale.unwrap_or(1.0);
                let mut profs = profiles::table1_profiles(dim, scale);
                profs.push(profiles::table1_holdout(dim, scale));
                Ok(GeneratePlan {
                    synthetic: SyntheticConfig {
                        dim,
                        class_sep,
                        class_names: profiles::class_names(),
                        seed,
                    },
                    profiles: profs,
                })
            }
            (None, false) => {
                let class_names = self.class_names.clone().ok_or_else(|| {
                    AppError::config("explicit profiles require class_names")
                })?;
                let profs = self
                    .profiles
                    .iter()
                    .map(|p| ClientProfile {
                        name: p.name.clone(),
                        class_counts: p.class_counts.clone(),
                        shift: Shift {
                            scale: p.scale.clone().unwrap_or_else(|| vec![1.0; dim]),
                            offset: p.offset.clone().unwrap_or_else(|| vec![0.0; dim]),
                            rotation_seed: p.rotation_seed.unwrap_or(0),
                        },
                    })
                    .collect();
                Ok(GeneratePlan {
                    synthetic: SyntheticConfig {
                        dim,
                        class_sep,
                        class_names,
                        seed,
                    },
                    profiles: profs,
                })
            }
            (Some(_), false) => Err(AppError::config(
                "generate: give either a preset or explicit profiles, not both",
            )),
            (None, true) => Err(AppError::config(
                "generate: needs a preset or explicit profiles",
            )),
        }
    }
}

pub fn generate_preset(name: &str, seed_override: Option<u64>) -> AppResult<GeneratePlan> {
    let scale = match name {
        "paper-table1" => 1.0,
        "paper-table1-tenth" => 0.1,
        other => return Err(AppError::config(format!("unknown generate preset '{other}'"))),
    };
    GenerateCfg {
        preset: Some("paper-table1".to_string()),
        scale: Some(scale),
        dim: None,
        class_sep: None,
        seed: None,
        class_names: None,
        profiles: Vec::new(),
    }
    .resolve(seed_override)
}

// ---------------------------------------------------------------------------
// run

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub experiment: Vec<ExperimentCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentCfg {
    pub id: String,
    pub paradigm: Paradigm,
    pub rounds: Option<usize>,
    pub kfold: Option<usize>,
    pub model: ModelCfg,
    pub strategy: Option<StrategyCfg>,
    #[serde(default)]
    pub trainer: TrainerCfg,
    pub data: DataCfg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCfg {
    /// "softmax_regression" or "mlp1h".
    pub kind: String,
    pub hidden_dim: Option<usize>,
    pub frozen_fraction: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyCfg {
    /// "fedavg", "fedmedian", "fedprox", or "fedopt".
    pub kind: String,
    pub iqr_filter: Option<bool>,
    pub iqr_k: Option<f64>,
    pub mu: Option<f64>,
    pub server_lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerCfg {
    pub local_epochs: Option<usize>,
    pub micro_batch: Option<usize>,
    pub accumulation_steps: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub clip_max_norm: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataCfg {
    /// CSV dataset paths, one per training client.
    pub clients: Option<Vec<PathBuf>>,
    /// Optional held-out institution CSV, never trained on.
    pub holdout: Option<PathBuf>,
    /// In-memory synthetic benchmark instead of CSV files.
    pub synthetic: Option<SyntheticDataCfg>,
    pub split_seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDataCfg {
    pub preset: String,
    pub scale: f64,
}

/// Fully resolved experiment, embedded verbatim in the results document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedExperiment {
    pub id: String,
    pub paradigm: Paradigm,
    pub model: ModelSpec,
    pub strategy: AggregationStrategy,
    pub rounds: usize,
    pub kfold: usize,
    pub trainer: TrainerConfig,
    pub data: ResolvedData,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedData {
    pub clients: Vec<String>,
    pub holdout: Option<String>,
    pub synthetic: Option<SyntheticDataCfg>,
    pub split_seed: u64,
}

impl StrategyCfg {
    fn resolve(&self) -> AppResult<AggregationStrategy> {
        let reject = |field: &str, kind: &str| {
            Err(AppError::config(format!(
                "strategy field '{field}' does not apply to kind '{kind}'"
            )))
        };
        match self.kind.as_str() {
            "fedavg" | "fedprox" | "fedmedian" => {
                for (set, name) in [
                    (self.server_lr.is_some(), "server_lr"),
                    (self.beta1.is_some(), "beta1"),
                    (self.beta2.is_some(), "beta2"),
                    (self.tau.is_some(), "tau"),
                ] {
                    if set {
                        return reject(name, &self.kind);
                    }
                }
            }
            _ => {}
        }
        match self.kind.as_str() {
            "fedavg" => {
                if self.iqr_filter.is_some() || self.iqr_k.is_some() || self.mu.is_some() {
                    return reject("iqr_filter/iqr_k/mu", "fedavg");
                }
                Ok(AggregationStrategy::FedAvg)
            }
            "fedmedian" => {
                if self.mu.is_some() {
                    return reject("mu", "fedmedian");
                }
                let d = MedianConfig::default();
                Ok(AggregationStrategy::FedMedian(MedianConfig {
                    iqr_filter: self.iqr_filter.unwrap_or(d.iqr_filter),
                    iqr_k: self.iqr_k.unwrap_or(d.iqr_k),
                }))
            }
            "fedprox" => {
                if self.iqr_filter.is_some() || self.iqr_k.is_some() {
                    return reject("iqr_filter/iqr_k", "fedprox");
                }
                Ok(AggregationStrategy::FedProx {
                    mu: self.mu.unwrap_or(0.01),
                })
            }
            "fedopt" => {
                if self.iqr_filter.is_some() || self.iqr_k.is_some() || self.mu.is_some() {
                    return reject("iqr_filter/iqr_k/mu", "fedopt");
                }
                let d = FedOptConfig::default();
                Ok(AggregationStrategy::FedOpt(FedOptConfig {
                    server_lr: self.server_lr.unwrap_or(d.server_lr),
                    beta1: self.beta1.unwrap_or(d.beta1),
                    beta2: self.beta2.unwrap_or(d.beta2),
                    tau: self.tau.unwrap_or(d.tau),
                }))
            }
            other => Err(AppError::config(format!("unknown strategy kind '{other}'"))),
        }
    }
}

impl ModelCfg {
    /// `input_dim` and `num_classes` come from the data at load time.
    fn resolve(&self, input_dim: usize, num_classes: usize) -> AppResult<ModelSpec> {
        let mut spec = match self.kind.as_str() {
            "softmax_regression" => {
                if self.hidden_dim.is_some() {
                    return Err(AppError::config(
                        "hidden_dim does not apply to softmax_regression",
                    ));
                }
                ModelSpec::softmax_regression(input_dim, num_classes)
            }
            "mlp1h" => ModelSpec::mlp(input_dim, self.hidden_dim.unwrap_or(32), num_classes),
            other => return Err(AppError::config(format!("unknown model kind '{other}'"))),
        };
        if let Some(f) = self.frozen_fraction {
            spec = spec.with_frozen_fraction(f);
        }
        spec.validate()
            .map_err(|e| AppError::config(e.to_string()))?;
        Ok(spec)
    }
}

impl TrainerCfg {
    fn resolve(&self) -> TrainerConfig {
        let d = TrainerConfig::default();
        TrainerConfig {
            local_epochs: self.local_epochs.unwrap_or(d.local_epochs),
            micro_batch: self.micro_batch.unwrap_or(d.micro_batch),
            accumulation_steps: self.accumulation_steps.unwrap_or(d.accumulation_steps),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            momentum: self.momentum.unwrap_or(d.momentum),
            clip_max_norm: self.clip_max_norm.unwrap_or(d.clip_max_norm),
            prox_mu: 0.0,
            seed: 0,
        }
    }
}

pub fn parse_run_file(text: &str) -> AppResult<RunFile> {
    toml::from_str(text).map_err(|e| AppError::config(e.to_string()))
}

pub fn parse_generate_file(text: &str) -> AppResult<GenerateFile> {
    toml::from_str(text).map_err(|e| AppError::config(e.to_string()))
}

pub fn load_run_config(path: &Path) -> AppResult<RunFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::config(format!("{}: {e}", path.display())))?;
    parse_run_file(&text)
}

impl ExperimentCfg {
    /// Resolve against the data dimensions; `input_dim`/`num_classes` are
    /// discovered by the runner after loading datasets.
    pub fn resolve(
        &self,
        input_dim: usize,
        num_classes: usize,
        master_seed: u64,
    ) -> AppResult<ResolvedExperiment> {
        if self.paradigm == Paradigm::Federated && self.strategy.is_none() {
            return Err(AppError::config(format!(
                "experiment '{}': federated paradigm requires a strategy",
                self.id
            )));
        }
        let strategy = match &self.strategy {
            Some(s) => s.resolve()?,
            None => AggregationStrategy::FedAvg,
        };
        let mut trainer = self.trainer.resolve();
        trainer.seed = 0; // per-(client, round) seeds are derived at run time
        Ok(ResolvedExperiment {
            id: self.id.clone(),
            paradigm: self.paradigm,
            model: self.model.resolve(input_dim, num_classes)?,
            strategy,
            rounds: self.rounds.unwrap_or(5),
            kfold: self.kfold.unwrap_or(4),
            trainer,
            data: ResolvedData {
                clients: self
                    .data
                    .clients
                    .clone()
                    .unwrap_or_default()
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect(),
                holdout: self.data.holdout.as_ref().map(|p| p.display().to_string()),
                synthetic: self.data.synthetic.clone(),
                split_seed: self.data.split_seed.unwrap_or(1),
            },
            master_seed,
        })
    }
}

/// Built-in run presets, expressed as ordinary config documents.
pub fn run_preset(name: &str) -> AppResult<RunFile> {
    let text = match name {
        "strategy-sweep" => STRATEGY_SWEEP_TOML,
        "paradigm-compare" => PARADIGM_COMPARE_TOML,
        other => return Err(AppError::config(format!("unknown run preset '{other}'"))),
    };
    parse_run_file(text)
}

const STRATEGY_SWEEP_TOML: &str = r#"
master_seed = 42

[[experiment]]
id = "fedavg-softmax"
paradigm = "federated"
model = { kind = "softmax_regression" }
strategy = { kind = "fedavg" }
data = { synthetic = { preset = "paper-table1", scale = 0.1 } }

[[experiment]]
id = "fedavg-mlp"
paradigm = "federated"
model = { kind = "mlp1h", hidden_dim = 24 }
strategy = { kind = "fedavg" }
data = { synthetic = { preset = "paper-table1", scale = 0.1 } }

[[experiment]]
id = "fedmedian-softmax"
paradigm = "federated"
model = { kind = "softmax_regression" }
strategy = { kind = "fedmedian" }
data = { synthetic = { preset = "paper-table1", scale = 0.1 } }

[[experiment]]
id = "fedmedian-mlp"
paradigm = "federated"
model = { kind = "mlp1h", hidden_dim = 24 }
strategy = { kind = "fedmedian" }
data = { synthetic = { preset = "paper-table1", scale = 0.1 } }

[[experiment]]
id = "fedprox-softmax"
paradigm = "federated"
model = { kind = "softmax_regression" }
strategy = { kind = "fedprox" }
data = { synthetic = { preset = "paper-table1", scale = 0.1 } }

[[experiment]]
id = "fedprox-mlp"
paradigm = "federated"
model = { kind = "mlp1h", hidden_dim = 24 }
strategy = { kind = "fedprox" }
data = { synthetic = { preset = "paper-table1", scale = 0.1 } }

[[experiment]]
id = "fedopt-softmax"
paradigm = "federated"
model = { kind = "softmax_regression" }
strategy = { kind = "fedopt" }
data = { synthetic = { preset = "paper-table1", scale = 0.1 } }

[[experiment]]
id = "fedopt-mlp"
paradigm = "federated"
model = { kind = "mlp1h", hidden_dim = 24 }
strategy = { kind = "fedopt" }
data = { synthetic = { preset = "paper-table1", scale = 0.1 } }
"#;

const PARADIGM_COMPARE_TOML: &str = r#"
master_seed = 42

[[experiment]]
id = "local"
paradigm = "local"
model = { kind = "softmax_regression" }
data = { synthetic = { preset = "paper-table1", scale = 0.1 } }

[[experiment]]
id = "federated"
paradigm = "federated"
model = { kind = "softmax_regression" }
strategy = { kind = "fedmedian" }
data = { synthetic = { preset = "paper-table1", scale = 0.1 } }

[[experiment]]
id = "centralized"
paradigm = "centralized"
model = { kind = "softmax_regression" }
data = { synthetic = { preset = "paper-table1", scale = 0.1 } }
"#;
