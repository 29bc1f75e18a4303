use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aies_cli::commands;
use aies_cli::config::{ExperimentConfig, RawConfig};
use aies_cli::error::Result;

/// Ensemble-sampler experiments: stretch-move MCMC runs, convergence
/// diagnostics and acceptance-behavior studies.
#[derive(Parser)]
#[command(name = "aies", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of key = value lines with optional [run] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scale factor applied to iteration and walker counts.
    #[arg(long)]
    scale: Option<f64>,
    /// Extra key=value overrides; repeatable, highest priority.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn resolve(&self, walkers_per_dim: usize, default_target: &str) -> Result<ExperimentConfig> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        raw.apply_overrides(&self.sets)?;
        let mut finals = Vec::new();
        if let Some(seed) = self.seed {
            finals.push(format!("seed={seed}"));
        }
        if let Some(out) = &self.out {
            finals.push(format!("out={}", out.display()));
        }
        if let Some(scale) = self.scale {
            finals.push(format!("scale={scale}"));
        }
        raw.apply_overrides(&finals)?;
        ExperimentConfig::resolve_with_target(raw, walkers_per_dim, default_target)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampler once per configured initialization and persist the
    /// chains.
    Sample(Common),
    /// Compute scale-reduction and stationarity diagnostics over persisted
    /// chains.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Chain files from matching `sample` runs.
        chains: Vec<PathBuf>,
    },
    /// Four-initialization suite on the multidimensional Rosenbrock
    /// density with L = 10 n walkers.
    Rosenbrock(Common),
    /// Accepted/rejected stretch-variable profiles from one-iteration
    /// experiments.
    Ztrace(Common),
    /// First-coordinate variance trajectory with tangent-slope probes.
    Predict(Common),
    /// Always-accept variance growth under the continuous-time scheduler.
    Meanfield(Common),
    /// Single-particle Metropolis baseline at a matched likelihood budget.
    Baseline(Common),
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Sample(common) => commands::cmd_sample(&common.resolve(2, "ar1")?),
        Command::Diagnose { common, chains } => {
            commands::cmd_diagnose(&common.resolve(2, "ar1")?, chains)
        }
        Command::Rosenbrock(common) => commands::cmd_rosenbrock(&common.resolve(10, "rosenbrock")?),
        Command::Ztrace(common) => commands::cmd_ztrace(&common.resolve(2, "std_gaussian")?),
        Command::Predict(common) => commands::cmd_predict(&common.resolve(2, "ar1")?),
        Command::Meanfield(common) => commands::cmd_meanfield(&common.resolve(2, "std_gaussian")?),
        Command::Baseline(common) => commands::cmd_baseline(&common.resolve(2, "rosenbrock")?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
