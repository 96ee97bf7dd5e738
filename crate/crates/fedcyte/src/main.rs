use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedcyte::config::{self, GeneratePlan};
use fedcyte::run::{self, render_results_jsonl};
use fedcyte::{atomic_write, report, AppError, AppResult};

#[derive(Parser)]
#[command(name = "fedcyte", about = "Deterministic federated-learning simulation engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic client datasets (CSV files plus a manifest).
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the configured master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the configured experiments and write results + report.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render the table document for an existing results file.
    Report {
        /// Path to a results.jsonl document.
        results: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}

fn dispatch(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Generate {
            config,
            preset,
            out,
            seed,
        } => {
            let plan: GeneratePlan = match (config, preset) {
                (Some(path), None) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| AppError::config(format!("{}: {e}", path.display())))?;
                    config::parse_generate_file(&text)?.generate.resolve(seed)?
                }
                (None, Some(name)) => config::generate_preset(&name, seed)?,
                _ => return Err(AppError::config("generate: give exactly one of --config or --preset")),
            };
            let files = run::cmd_generate(&plan, &out)?;
            println!("wrote {} dataset(s) + manifest.json to {}", files.len(), out.display());
            Ok(())
        }
        Command::Run {
            config,
            preset,
            out,
            seed,
        } => {
            let file = match (config, preset) {
                (Some(path), None) => config::load_run_config(&path)?,
                (None, Some(name)) => config::run_preset(&name)?,
                _ => return Err(AppError::config("run: give exactly one of --config or --preset")),
            };
            let master_seed = seed.or(file.master_seed).unwrap_or(42);
            let records = run::run_all(&file.experiment, master_seed, run::thread_cap())?;
            std::fs::create_dir_all(&out)?;
            atomic_write(&out.join("results.jsonl"), render_results_jsonl(&records)?.as_bytes())?;
            atomic_write(&out.join("report.txt"), report::render_report(&records).as_bytes())?;
            println!(
                "ran {} experiment(s); results in {}",
                records.len(),
                out.display()
            );
            Ok(())
        }
        Command::Report { results } => {
            let text = std::fs::read_to_string(&results)
                .map_err(|e| AppError::runtime(format!("{}: {e}", results.display())))?;
            let records = run::parse_results_jsonl(&text)?;
            print!("{}", report::render_report(&records));
            Ok(())
        }
    }
}
