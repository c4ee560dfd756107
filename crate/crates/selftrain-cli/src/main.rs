//! `selftrain`: run the experiment suites from the command line.
//!
//! One subcommand per experiment. Each run starts from the subcommand's
//! default configuration, optionally replaced by `--config <file.json>`, then
//! applies the individual flag overrides, validates, and executes. Artifacts
//! (a config sidecar plus CSVs/JSON) land under the output directory.
//!
//! Exit codes: 0 success, 2 configuration error (bad flags, unreadable or
//! invalid config file, subcommand/config mismatch), 3 runtime failure while
//! the experiment is executing.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use selftrain::experiments::{run_experiment, ExperimentConfig, ExperimentKind, RunOutput};
use selftrain::Error;

#[derive(Parser)]
#[command(
    name = "selftrain",
    version,
    about = "Monte-Carlo experiment runner for self-training on mixture models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Averaging estimator + one-shot self-training sweep over unlabeled budgets
    #[command(name = "gmm_sweep")]
    GmmSweep(RunArgs),
    /// Supervised baselines vs fresh-batch and reused-batch self-training
    #[command(name = "iterate_compare")]
    IterateCompare(RunArgs),
    /// Averaging vs logistic refits across thresholds and iteration counts
    #[command(name = "logistic_sweep")]
    LogisticSweep(RunArgs),
    /// Population loss scans along the mixture direction
    #[command(name = "landscape")]
    Landscape(RunArgs),
    /// Clustering-bound violation rate and randomized transfer checks
    #[command(name = "bounds_suite")]
    BoundsSuite(RunArgs),
    /// Bootstrap CIs for the fresh-self-training minus supervised accuracy gap
    #[command(name = "gap_fresh_vs_supervised")]
    GapFreshVsSupervised(RunArgs),
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::GmmSweep(a) => (ExperimentKind::GmmSweep, a),
            Command::IterateCompare(a) => (ExperimentKind::IterateCompare, a),
            Command::LogisticSweep(a) => (ExperimentKind::LogisticSweep, a),
            Command::Landscape(a) => (ExperimentKind::Landscape, a),
            Command::BoundsSuite(a) => (ExperimentKind::BoundsSuite, a),
            Command::GapFreshVsSupervised(a) => (ExperimentKind::GapFreshVsSupervised, a),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; its `experiment` must match the subcommand.
    /// Omitted: the subcommand's defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the master seed.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override the trial count per cell.
    #[arg(long, value_name = "INT")]
    trials: Option<usize>,

    /// Worker threads (0 = one per core). Results are identical for any value.
    #[arg(long, value_name = "INT")]
    threads: Option<usize>,
}

fn build_config(kind: ExperimentKind, args: &RunArgs) -> selftrain::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.experiment != kind {
                return Err(Error::InvalidConfig {
                    field: "experiment",
                    message: format!(
                        "config file is for `{}` but the subcommand is `{}`",
                        cfg.experiment.as_str(),
                        kind.as_str()
                    ),
                });
            }
            cfg
        }
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_path = out.display().to_string();
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(feature = "parallel")]
fn execute(cfg: &ExperimentConfig, threads: Option<usize>) -> selftrain::Result<RunOutput> {
    match threads {
        None => run_experiment(cfg),
        // num_threads(0) asks rayon for its default (one worker per core).
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(|| run_experiment(cfg)),
    }
}

#[cfg(not(feature = "parallel"))]
fn execute(cfg: &ExperimentConfig, threads: Option<usize>) -> selftrain::Result<RunOutput> {
    if threads.map_or(false, |n| n > 1) {
        eprintln!("note: built without the `parallel` feature; running single-threaded");
    }
    run_experiment(cfg)
}

fn main() -> ExitCode {
    let (kind, args) = Cli::parse().command.split();
    let cfg = match build_config(kind, &args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cfg, args.threads) {
        Ok(output) => {
            for file in &output.files {
                println!("wrote {}", file.display());
            }
            if !output.rows.is_empty() {
                println!("{} sweep rows", output.rows.len());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
