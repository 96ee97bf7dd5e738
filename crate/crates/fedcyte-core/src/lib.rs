//! Deterministic federated-learning simulation core.
//!
//! Everything in this crate is a pure function of its inputs: seeded data
//! generation, local training, the four server aggregation strategies, and
//! the three end-to-end training paradigms (federated, per-client local,
//! centralized with k-fold CV). IO, configuration files, and the CLI live in
//! the companion `fedcyte` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod aggregation;
pub mod data;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod orchestrator;
pub mod params;
pub mod profiles;
pub mod seed;
pub mod trainer;

pub use aggregation::{AggregationStrategy, ClientUpdate, ServerOptState};
pub use data::{ClientProfile, LabeledDataset, SplitSet};
pub use error::CoreError;
pub use loss::FocalConfig;
pub use metrics::MetricsReport;
pub use model::{ModelKind, ModelSpec};
pub use orchestrator::{ClientData, ExperimentConfig, RunResult};
pub use params::ParamVector;
pub use trainer::TrainerConfig;
