use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shmf_core::bessel::BasisCache;
use shmf_harness::commands::{self, HarnessError, Outcome, EXIT_INVALID};
use shmf_harness::{Experiment, ExperimentConfig};

/// Stochastic 1-corotational harmonic map flow: spectral solver and experiments.
#[derive(Parser)]
#[command(name = "shmf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override `mc.n_paths`.
    #[arg(long, global = true)]
    paths: Option<u64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print Bessel zeros, normalisations, eigenvalues and noise amplitudes.
    Spectrum,
    /// Run a single path up to t*.
    Simulate,
    /// Monte Carlo estimate of P(tau <= t*).
    BlowupProb,
    /// Run the subsolution checkers.
    Verify,
    /// Build a steering path and check that it reaches its target.
    Control,
}

fn load(common: &Common) -> Result<Experiment, HarnessError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.mc.seed = s;
    }
    if let Some(n) = common.paths {
        cfg.mc.n_paths = n;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    let cache = BasisCache::from_env();
    Ok(Experiment::build(cfg, cache.as_ref())?)
}

fn dispatch(cli: &Cli) -> Result<Outcome, HarnessError> {
    let exp = load(&cli.common)?;
    let out = exp.config.output.dir.clone();
    match cli.command {
        Command::Spectrum => Ok(commands::spectrum(&exp)),
        Command::Simulate => commands::simulate(&exp, &out),
        Command::BlowupProb => commands::blowup_prob(&exp, &out).map(|(o, _)| o),
        Command::Verify => commands::verify(&exp, &out),
        Command::Control => commands::control(&exp, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(o) => {
            if o.exit_code != 0 {
                eprintln!("{}", o.summary.trim_end());
            } else if !cli.common.quiet {
                println!("{}", o.summary.trim_end());
            }
            ExitCode::from(o.exit_code)
        }
        Err(e) => {
            eprintln!("shmf: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
