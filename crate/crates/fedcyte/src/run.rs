//! Experiment execution: dataset materialization, paradigm dispatch, and the
//! JSONL results document.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use fedcyte_core::data::{generate_synthetic, split};
use fedcyte_core::orchestrator::{run_centralized, run_federated, run_local, ExperimentConfig};
use fedcyte_core::{profiles, ClientData, LabeledDataset, RunResult};

use crate::config::{ExperimentCfg, GeneratePlan, Paradigm, ResolvedExperiment};
use crate::{atomic_write, csv, AppError, AppResult};

/// One line of the results document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: String,
    pub config: ResolvedExperiment,
    pub class_names: Vec<String>,
    pub runs: Vec<NamedRun>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedRun {
    pub name: String,
    pub run: RunResult,
}

/// Write one CSV per profile plus a manifest listing seeds and profiles.
pub fn cmd_generate(plan: &GeneratePlan, out_dir: &Path) -> AppResult<Vec<String>> {
    std::fs::create_dir_all(out_dir)?;
    let datasets = generate_synthetic(&plan.profiles, &plan.synthetic)?;
    let mut files = Vec::new();
    for (profile, ds) in plan.profiles.iter().zip(&datasets) {
        let file = format!("{}.csv", profile.name);
        atomic_write(&out_dir.join(&file), csv::render_csv(ds).as_bytes())?;
        files.push(file);
    }
    let manifest = serde_json::json!({
        "seed": plan.synthetic.seed,
        "dim": plan.synthetic.dim,
        "class_sep": plan.synthetic.class_sep,
        "class_names": plan.synthetic.class_names,
        "profiles": plan.profiles,
        "files": files,
    });
    atomic_write(
        &out_dir.join("manifest.json"),
        format!("{:#}\n", manifest).as_bytes(),
    )?;
    Ok(files)
}

struct MaterializedData {
    clients: Vec<ClientData>,
    holdout: Option<LabeledDataset>,
}

fn materialize_data(cfg: &ExperimentCfg, master_seed: u64) -> AppResult<MaterializedData> {
    match (&cfg.data.synthetic, &cfg.data.clients) {
        (Some(syn), None) => {
            if syn.preset != "paper-table1" {
                return Err(AppError::config(format!(
                    "unknown synthetic preset '{}'",
                    syn.preset
                )));
            }
            let bench = profiles::build_table1_benchmark(syn.scale, master_seed)?;
            Ok(MaterializedData {
                clients: bench.clients,
                holdout: Some(bench.holdout),
            })
        }
        (None, Some(paths)) => {
            if paths.is_empty() {
                return Err(AppError::config(format!(
                    "experiment '{}': no client datasets",
                    cfg.id
                )));
            }
            let split_seed = cfg.data.split_seed.unwrap_or(1);
            let clients = paths
                .iter()
                .map(|p| {
                    let ds = csv::load_csv(p)?;
                    let name = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| p.display().to_string());
                    Ok(ClientData {
                        name,
                        split: split(&ds, split_seed)?,
                    })
                })
                .collect::<AppResult<Vec<_>>>()?;
            let holdout = cfg
                .data
                .holdout
                .as_ref()
                .map(|p| csv::load_csv(p))
                .transpose()?;
            Ok(MaterializedData { clients, holdout })
        }
        (Some(_), Some(_)) => Err(AppError::config(format!(
            "experiment '{}': give either synthetic data or client CSVs, not both",
            cfg.id
        ))),
        (None, None) => Err(AppError::config(format!(
            "experiment '{}': data section needs clients or synthetic",
            cfg.id
        ))),
    }
}

pub fn execute_experiment(cfg: &ExperimentCfg, master_seed: u64) -> AppResult<ExperimentRecord> {
    let data = materialize_data(cfg, master_seed)?;
    let dim = data.clients[0].split.train.dim();
    let num_classes = data.clients[0].split.train.num_classes();
    let resolved = cfg.resolve(dim, num_classes, master_seed)?;

    let core_cfg = ExperimentConfig {
        model: resolved.model.clone(),
        strategy: resolved.strategy,
        rounds: resolved.rounds,
        trainer: resolved.trainer,
        kfold: resolved.kfold,
        master_seed,
    };
    let holdout = data.holdout.as_ref();
    let runs = match resolved.paradigm {
        Paradigm::Federated => {
            let run = run_federated(&core_cfg, &data.clients, holdout)?;
            vec![NamedRun {
                name: format!("federated-{}", resolved.strategy.name().to_lowercase()),
                run,
            }]
        }
        Paradigm::Local => run_local(&core_cfg, &data.clients, holdout)?
            .into_iter()
            .zip(&data.clients)
            .map(|(run, client)| NamedRun {
                name: format!("local-{}", client.name),
                run,
            })
            .collect(),
        Paradigm::Centralized => {
            let run = run_centralized(&core_cfg, &data.clients, holdout)?;
            vec![NamedRun {
                name: "centralized".to_string(),
                run,
            }]
        }
    };
    Ok(ExperimentRecord {
        id: resolved.id.clone(),
        config: resolved,
        class_names: data.clients[0].split.train.class_names().to_vec(),
        runs,
    })
}

/// Worker cap: `FEDCYTE_THREADS`, defaulting to available parallelism.
pub fn thread_cap() -> usize {
    std::env::var("FEDCYTE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Run every experiment; records come back in config order regardless of the
/// worker count, so output bytes are independent of scheduling.
pub fn run_all(
    experiments: &[ExperimentCfg],
    master_seed: u64,
    threads: usize,
) -> AppResult<Vec<ExperimentRecord>> {
    if threads <= 1 || experiments.len() <= 1 {
        return experiments
            .iter()
            .map(|e| execute_experiment(e, master_seed))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<AppResult<ExperimentRecord>>>> =
        Mutex::new((0..experiments.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.min(experiments.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= experiments.len() {
                    break;
                }
                let result = execute_experiment(&experiments[i], master_seed);
                slots.lock().expect("worker poisoned lock")[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker poisoned lock")
        .into_iter()
        .map(|slot| slot.expect("all experiments executed"))
        .collect()
}

pub fn render_results_jsonl(records: &[ExperimentRecord]) -> AppResult<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(
            &serde_json::to_string(r).map_err(|e| AppError::runtime(e.to_string()))?,
        );
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_results_jsonl(text: &str) -> AppResult<Vec<ExperimentRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| AppError::runtime(format!("results line {}: {e}", i + 1)))
        })
        .collect()
}
