use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swipt_core::harness::{self, ExperimentConfig, Variant};
use swipt_core::Error;

/// Robust SWIPT beamforming experiments.
#[derive(Debug, Parser)]
#[command(name = "swipt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one channel drop and write its traces, beamformers and manifest.
    Run(RunArgs),
    /// Sweep one parameter over many drops and write per-drop rows and averages.
    Sweep(SweepArgs),
    /// Re-estimate the energy outage of a stored single-run solution.
    Validate(ValidateArgs),
    /// Print a commented configuration with every default value.
    DumpConfigTemplate {
        /// Write to this file instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration; defaults are used when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// chance, deterministic or nominal.
    #[arg(long)]
    variant: Option<Variant>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Drop index to solve.
    #[arg(long)]
    drop: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    drops: Option<usize>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Output directory of a `run`.
    #[arg(short, long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    n_mc: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        Ok(cfg)
    }
}

fn format_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = args.common.load()?;
            if let Some(d) = args.drop {
                cfg.drop = d;
            }
            cfg.validate()?;
            let out = harness::run_single(&cfg)?;
            let s = &out.summary;
            println!(
                "variant {} tau {:.6} lower-bound rate {:.6} nats ({:.6} bits) monte-carlo rate {:.6} nats",
                s.variant.as_str(),
                s.tau,
                s.lower_bound_rate_nats,
                s.lower_bound_rate_bits,
                s.mc_avg_true_rate_nats
            );
            println!(
                "outer iterations {} converged {} max violation {:.2e}",
                s.outer_iterations,
                s.converged,
                s.constraints.max_violation()
            );
            println!("outputs written to {}", cfg.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let mut cfg = args.common.load()?;
            if let Some(d) = args.drops {
                cfg.n_drops = d;
            }
            cfg.validate()?;
            let out = harness::run_sweep(&cfg)?;
            println!("{} value variant solved mean_rate_nats std_rate_nats mean_tau", cfg.sweep_axis.as_str());
            for s in &out.summary {
                println!(
                    "{} {} {}/{} {} {} {}",
                    s.sweep_value,
                    s.variant.as_str(),
                    s.n_solved,
                    s.n_drops,
                    format_opt(s.mean_rate),
                    format_opt(s.std_rate),
                    format_opt(s.mean_tau)
                );
            }
            println!("outputs written to {}", cfg.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(args) => {
            let report = harness::validate_outage(&args.dir, args.n_mc, args.seed)?;
            for r in &report.rows {
                println!(
                    "user {} outage {:.5} bound {:.5} ({})",
                    r.user,
                    r.empirical_outage,
                    r.theta + r.ci_half_width,
                    if r.passes() { "ok" } else { "exceeded" }
                );
            }
            if report.passed() {
                println!("PASS");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("FAIL ({} solution)", report.variant.as_str());
                Ok(ExitCode::from(1))
            }
        }
        Command::DumpConfigTemplate { output } => {
            match output {
                Some(path) => std::fs::write(&path, harness::CONFIG_TEMPLATE).map_err(|e| Error::io(path, e))?,
                None => print!("{}", harness::CONFIG_TEMPLATE),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_infeasible() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
