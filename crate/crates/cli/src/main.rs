//! `maxout`: reproducible experiments with random maxout features.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(
    name = "maxout",
    version,
    about = "Random maxout features: kernels, hashing, linear models and embeddings"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment configuration (TOML). A previous report also works.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run with this single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the projection bank and Φ(X) for the dataset.
    Featurize,
    /// Train a linear model on maxout features.
    Train,
    /// Evaluate a saved model on the test split.
    Eval {
        /// Model file (default: <out>/model.bin).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Bank file (default: <out>/bank.bin).
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Evaluate on the training split instead of the test split.
        #[arg(long)]
        on_train: bool,
    },
    /// Collision probability and expected distance curves over a ρ grid.
    KernelProbe {
        /// Pool sizes, comma-separated.
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<usize>>,
        #[arg(long)]
        rho_points: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// PCA of the maxout features (and optional distance curves).
    Embed,
    /// q-ary LSH codes of every row.
    Hash,
    /// Error-rate grid over the configured m × q values and seeds.
    Sweep,
}

impl Common {
    fn config(&self, required: bool) -> CliResult<ExperimentConfig> {
        let mut cfg = match (&self.config, required) {
            (Some(p), _) => ExperimentConfig::load(p)?,
            (None, true) => return Err(CliError::config("--config is required for this command")),
            (None, false) => {
                ExperimentConfig::parse("[dataset]\nkind = \"circle\"\nn = 1\nseed = 0\n")?
            }
        };
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("--threads: {e}")))?;
    }
    let common = &cli.common;
    match cli.command {
        Command::Featurize => commands::featurize(&common.config(true)?),
        Command::Train => commands::train(&common.config(true)?),
        Command::Eval {
            model,
            bank,
            on_train,
        } => commands::eval(&common.config(true)?, model, bank, on_train),
        Command::KernelProbe {
            q,
            rho_points,
            samples,
        } => {
            let mut cfg = common.config(false)?;
            if let Some(q) = q {
                cfg.probe.q = q;
            }
            if let Some(n) = rho_points {
                cfg.probe.rho_points = n;
            }
            if let Some(n) = samples {
                cfg.probe.samples = n;
            }
            if let Some(s) = common.seed {
                cfg.probe.seed = s;
            }
            cfg.validate()?;
            commands::kernel_probe(&cfg)
        }
        Command::Embed => commands::embed(&common.config(true)?),
        Command::Hash => commands::hash(&common.config(true)?),
        Command::Sweep => commands::sweep(&common.config(true)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
