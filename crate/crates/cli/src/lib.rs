//! Library side of the `agreement` binary: configuration loading, flag
//! parsing and the subcommand bodies, kept here so they can be tested
//! without spawning a process.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::{DecodeOptions, Status};
use config::{ExperimentConfig, Overrides};

#[derive(Debug, Parser)]
#[command(name = "agreement", version, about = "Agreement-test simulation, decoding and hypergraph pruning")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON or TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo draws for every estimator; overrides the configuration.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Enumerate exactly; fails on instances that are too large.
    #[arg(long, global = true)]
    pub exact: bool,
    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an ensemble from the configuration.
    Gen,
    /// Add the configured corruption to an ensemble file.
    Corrupt {
        #[arg(long)]
        input: PathBuf,
    },
    /// Estimate the agreement failure rate.
    Agree {
        /// Ensemble file; generated from the configuration when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Plurality-decode a global function, optionally running the restricted decoder.
    Decode {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Break plurality ties by this seed instead of toward the smallest symbol.
        #[arg(long)]
        tie_seed: Option<u64>,
        /// Comma-separated seed set `T` for the restricted decoder.
        #[arg(long)]
        restricted: Option<String>,
        /// Abort threshold for the restricted decoder (diagnostics only).
        #[arg(long, default_value_t = 0.5)]
        abort_threshold: f64,
    },
    /// Prune a hypergraph to bounded branching factor.
    Prune {
        /// Hypergraph text file: a header `n m`, then one edge per line.
        #[arg(long)]
        input: PathBuf,
        /// Also write the pruned hypergraph in the same text format.
        #[arg(long)]
        pruned: Option<PathBuf>,
    },
    /// Measure the unique-hit probability of every edge.
    Verify {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run a corruption-rate sweep and write CSV rows.
    Sweep,
}

impl Cli {
    pub fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.global.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(&Overrides { seed: self.global.seed, samples: self.global.samples, out: self.global.out.clone() });
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn run(&self) -> Result<Status> {
        let cfg = self.config()?;
        let exact = self.global.exact;
        match &self.command {
            Command::Gen => commands::gen(&cfg),
            Command::Corrupt { input } => commands::corrupt(&cfg, input),
            Command::Agree { input } => commands::agree(&cfg, input.as_deref(), exact),
            Command::Decode { input, tie_seed, restricted, abort_threshold } => {
                let restricted = restricted.as_deref().map(commands::parse_vertex_list).transpose()?;
                let opts = DecodeOptions { tie_seed: *tie_seed, restricted, abort_threshold: *abort_threshold };
                commands::decode(&cfg, input.as_deref(), exact, &opts)
            }
            Command::Prune { input, pruned } => commands::prune(&cfg, input, pruned.as_ref()),
            Command::Verify { input } => commands::verify(&cfg, input, exact),
            Command::Sweep => commands::sweep(&cfg, exact),
        }
    }
}
