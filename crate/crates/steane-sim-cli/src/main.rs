//! Experiment runner CLI: configured runs, figure presets, decoder table
//! inspection and the exhaustive single-fault check.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use steane_sim::experiment::{
    render_tables, run_experiment_with, run_ft_suite, run_preset, tables_json, DebugSinks,
    ExperimentConfig, ExperimentResult, Preset,
};

#[derive(Parser)]
#[command(
    name = "steane-sim",
    version,
    about = "Monte-Carlo simulator for Steane-type and flag-based quantum error correction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args)]
struct RunOverrides {
    /// Shots per fidelity point.
    #[arg(long)]
    shots: Option<u64>,
    /// Monte-Carlo seed; identical (config, seed) reproduce bytes.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: STEANE_SIM_WORKERS or all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Write results to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        /// Path to the experiment config (see docs/config.example.toml).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: RunOverrides,
        /// Spool raw shot outcomes to a binary record log.
        #[arg(long)]
        spool: Option<PathBuf>,
        /// Emit per-shot decode traces as JSON lines (use few shots).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run one of the built-in figure presets.
    Preset {
        /// fig3, fig4, figA6 or figA7.
        name: String,
        #[command(flatten)]
        overrides: RunOverrides,
    },
    /// Print the decoder lookup tables.
    Tables {
        /// Emit JSON instead of the plain-text rendering.
        #[arg(long)]
        json: bool,
    },
    /// Exhaustive single-fault fault-tolerance check of the shipped
    /// circuits; exits non-zero on any logical failure.
    Check,
}

fn default_workers() -> usize {
    if let Ok(value) = std::env::var("STEANE_SIM_WORKERS") {
        if let Ok(n) = value.parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
        eprintln!("warning: ignoring invalid STEANE_SIM_WORKERS={value}");
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn emit(result: &ExperimentResult, overrides: &RunOverrides) -> Result<()> {
    let payload = match overrides.format {
        Format::Json => result.to_json(),
        Format::Csv => result.to_csv(),
    };
    match &overrides.out {
        Some(path) => fs::write(path, payload).with_context(|| format!("writing {path:?}"))?,
        None => print!("{payload}"),
    }
    eprintln!(
        "completed {} fidelity points in {:.1} s",
        result.rows.len(),
        result.wall_time_ms / 1e3
    );
    Ok(())
}

fn apply_overrides(config: &mut ExperimentConfig, overrides: &RunOverrides) {
    if let Some(shots) = overrides.shots {
        config.shots = shots;
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    config.workers = overrides.workers.unwrap_or_else(default_workers);
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, overrides, spool, trace } => {
            let text =
                fs::read_to_string(&config).with_context(|| format!("reading {config:?}"))?;
            let mut parsed = ExperimentConfig::from_toml_str(&text)?;
            apply_overrides(&mut parsed, &overrides);

            let mut spool_file = match &spool {
                Some(path) => {
                    Some(fs::File::create(path).with_context(|| format!("creating {path:?}"))?)
                }
                None => None,
            };
            let mut trace_file = match &trace {
                Some(path) => {
                    Some(fs::File::create(path).with_context(|| format!("creating {path:?}"))?)
                }
                None => None,
            };
            let sinks = DebugSinks {
                spool: spool_file.as_mut().map(|f| f as &mut dyn Write),
                trace: trace_file.as_mut().map(|f| f as &mut dyn Write),
            };
            let result = run_experiment_with(&parsed, sinks)?;
            emit(&result, &overrides)?;
        }
        Command::Preset { name, overrides } => {
            let preset = Preset::parse(&name)?;
            let shots = overrides.shots.unwrap_or(100_000);
            let seed = overrides.seed.unwrap_or(1);
            let workers = overrides.workers.unwrap_or_else(default_workers);
            let result = run_preset(preset, shots, seed, workers)?;
            emit(&result, &overrides)?;
        }
        Command::Tables { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(&tables_json())?);
            } else {
                print!("{}", render_tables());
            }
        }
        Command::Check => {
            let report = run_ft_suite(&[11, 22, 33, 44])?;
            for (label, entry) in &report.entries {
                let status = if entry.failures.is_empty() { "PASS" } else { "FAIL" };
                println!(
                    "{status} {label}: {} fault locations, {} injections, {} logical failures",
                    entry.fault_locations,
                    entry.injections_run,
                    entry.failures.len()
                );
                for failure in entry.failures.iter().take(5) {
                    println!(
                        "    instruction {} ({}) fault {} seed {}",
                        failure.instruction,
                        failure.instruction_repr,
                        failure.fault,
                        failure.seed
                    );
                }
            }
            if !report.passed() {
                bail!("single-fault check found logical failures");
            }
            println!("all circuits are fault tolerant to single faults");
        }
    }
    Ok(())
}
