//! Subcommand bodies. Each writes its files under the output directory and
//! returns a summary for the terminal plus the process exit code.

use std::fmt;
use std::io;
use std::path::Path;

use serde::Serialize;
use shmf_core::solver::Status;
use shmf_core::ShmfError;

use crate::config::{BasisBlock, ConfigError, Experiment, InitialBlock, NoiseBlock, SolverBlock};
use crate::control::run_control;
use crate::mc::{run_monte_carlo, simulate_path, McResult, PathRecord};
use crate::output::{fmt_f64, path_csv_name, write_trajectory_csv, JsonlDoc};
use crate::verify::run_verify;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_STALL: u8 = 2;

#[derive(Debug)]
pub enum HarnessError {
    Config(ConfigError),
    Numerical(ShmfError),
    Io(io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => EXIT_INVALID,
            HarnessError::Numerical(e) => match e {
                ShmfError::Domain { .. } | ShmfError::Validation(_) | ShmfError::Usage(_) | ShmfError::Cache(_) => {
                    EXIT_INVALID
                }
                _ => EXIT_STALL,
            },
        }
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(e) => write!(f, "config error: {e}"),
            HarnessError::Numerical(e) => write!(f, "{e}"),
            HarnessError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Config(e)
    }
}

impl From<ShmfError> for HarnessError {
    fn from(e: ShmfError) -> Self {
        HarnessError::Numerical(e)
    }
}

impl From<io::Error> for HarnessError {
    fn from(e: io::Error) -> Self {
        HarnessError::Io(e)
    }
}

/// Terminal summary and exit code of a finished subcommand.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub exit_code: u8,
}

/// Everything in the configuration that determines the results. The output
/// directory and worker count are left out so that they do not change the
/// bytes written.
#[derive(Serialize)]
struct ConfigEcho<'a> {
    record: &'static str,
    schema_version: u32,
    basis: &'a BasisBlock,
    solver: &'a SolverBlock,
    dt_min_resolved: f64,
    noise: &'a NoiseBlock,
    initial: &'a InitialBlock,
    n_paths: u64,
    seed: u64,
    t_star: f64,
}

fn echo(exp: &Experiment) -> ConfigEcho<'_> {
    let c = &exp.config;
    ConfigEcho {
        record: "config",
        schema_version: c.schema_version,
        basis: &c.basis,
        solver: &c.solver,
        dt_min_resolved: c.resolved_dt_min(),
        noise: &c.noise,
        initial: &c.initial,
        n_paths: c.mc.n_paths,
        seed: c.mc.seed,
        t_star: c.mc.t_star,
    }
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    record: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

/// Table of `k, x_k, c_k, -x_k², σ_k`.
pub fn spectrum(exp: &Experiment) -> Outcome {
    let b = &exp.basis;
    let mut s = String::from("k,x_k,c_k,eigenvalue,sigma_k\n");
    for k in 0..b.n_modes() {
        let sigma = exp.spectrum.as_ref().map_or(0.0, |sp| sp.sigmas()[k]);
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            k + 1,
            fmt_f64(b.zeros()[k]),
            fmt_f64(b.norm_consts()[k]),
            fmt_f64(-b.eigenvalues()[k]),
            fmt_f64(sigma)
        ));
    }
    Outcome { summary: s, exit_code: EXIT_OK }
}

/// Path 0 up to `t*`; writes `simulate.jsonl` and `trajectory.csv`.
pub fn simulate(exp: &Experiment, out: &Path) -> Result<Outcome, HarnessError> {
    let run = simulate_path(exp, 0, true)?;
    let mut doc = JsonlDoc::new();
    doc.push(&echo(exp))?;
    doc.push(&Tagged { record: "path", body: &run.record })?;
    doc.write(&out.join("simulate.jsonl"))?;
    write_trajectory_csv(&out.join("trajectory.csv"), &run.snapshots)?;
    let r = &run.record;
    let summary = format!(
        "status {} at t = {} (tau {}), grad0 {:.6e}, {} accepted / {} rejected steps",
        r.status,
        r.final_time,
        r.tau.map_or("none".into(), |t| t.to_string()),
        r.final_grad0,
        r.accepted,
        r.rejected
    );
    let exit_code = if run.status == Status::Stalled { EXIT_STALL } else { EXIT_OK };
    Ok(Outcome { summary, exit_code })
}

#[derive(Serialize)]
struct McSummary {
    record: &'static str,
    n_requested: u64,
    n_paths: u64,
    n_blowup: u64,
    n_stalled: u64,
    p_hat: f64,
    wilson_lo: f64,
    wilson_hi: f64,
    stalled_paths: Vec<u64>,
}

/// Writes `blowup_prob.jsonl` (config, one line per path, summary) and, if
/// enabled, one CSV per path.
pub fn write_mc_outputs(
    exp: &Experiment,
    result: &McResult,
    runs: &[crate::mc::PathRun],
    out: &Path,
) -> io::Result<()> {
    let mut doc = JsonlDoc::new();
    doc.push(&echo(exp))?;
    for p in &result.paths {
        doc.push(&Tagged::<PathRecord> { record: "path", body: p })?;
    }
    doc.push(&McSummary {
        record: "summary",
        n_requested: result.n_requested,
        n_paths: result.n_paths,
        n_blowup: result.n_blowup,
        n_stalled: result.n_stalled,
        p_hat: result.p_hat,
        wilson_lo: result.wilson.0,
        wilson_hi: result.wilson.1,
        stalled_paths: result.paths.iter().filter(|p| p.status == "stalled").map(|p| p.path_index).collect(),
    })?;
    doc.write(&out.join("blowup_prob.jsonl"))?;
    if exp.config.output.write_trajectories {
        for r in runs {
            write_trajectory_csv(&path_csv_name(out, r.record.path_index), &r.snapshots)?;
        }
    }
    Ok(())
}

/// Monte Carlo estimate of `P(τ ≤ t*)`.
pub fn blowup_prob(exp: &Experiment, out: &Path) -> Result<(Outcome, McResult), HarnessError> {
    exp.config.validate_blowup()?;
    let keep = exp.config.output.write_trajectories;
    let (result, runs) = run_monte_carlo(exp, exp.config.mc.workers, keep)?;
    write_mc_outputs(exp, &result, &runs, out)?;
    let mut summary = format!(
        "p_hat = {:.4} ({} of {} paths blew up before t* = {}), Wilson 95% [{:.4}, {:.4}], runtime {:.2} s",
        result.p_hat,
        result.n_blowup,
        result.n_paths,
        exp.config.mc.t_star,
        result.wilson.0,
        result.wilson.1,
        result.runtime.as_secs_f64()
    );
    if result.n_stalled > 0 {
        summary.push_str(&format!(
            "\nwarning: {} stalled path(s) excluded from the estimate",
            result.n_stalled
        ));
    }
    let exit_code = if result.n_paths == 0 { EXIT_STALL } else { EXIT_OK };
    Ok((Outcome { summary, exit_code }, result))
}

/// Subsolution checkers; writes `verify.jsonl`. Exit 2 if any check fails.
pub fn verify(exp: &Experiment, out: &Path) -> Result<Outcome, HarnessError> {
    let block = exp.config.verify.clone().unwrap_or_default();
    let report = run_verify(&block)?;
    let mut doc = JsonlDoc::new();
    for c in &report.checks {
        doc.push(&Tagged { record: "check", body: c })?;
    }
    for r in &report.inequality {
        doc.push(&Tagged { record: "inequality", body: r })?;
    }
    for r in &report.sharpness {
        doc.push(&Tagged { record: "sharpness", body: r })?;
    }
    doc.write(&out.join("verify.jsonl"))?;
    let summary = report
        .checks
        .iter()
        .map(|c| format!("{} {}: {:.3e} (limit {:.1e})", if c.pass { "ok  " } else { "FAIL" }, c.name, c.value, c.limit))
        .collect::<Vec<_>>()
        .join("\n");
    let exit_code = if report.pass() { EXIT_OK } else { EXIT_STALL };
    Ok(Outcome { summary, exit_code })
}

/// Steering path round trip; writes `control.jsonl` and `control.csv`.
pub fn control(exp: &Experiment, out: &Path) -> Result<Outcome, HarnessError> {
    let block = exp.config.control.clone().unwrap_or_default();
    let (report, snapshots) = run_control(exp, &block)?;
    let mut doc = JsonlDoc::new();
    doc.push(&Tagged { record: "control", body: &report })?;
    doc.write(&out.join("control.jsonl"))?;
    write_trajectory_csv(&out.join("control.csv"), &snapshots)?;
    let summary = format!(
        "|h(T1) - h1|_beta = {:.3e}, relative {:.3e} (limit {:.0e}), status {}",
        report.error, report.rel_error, report.limit, report.status
    );
    let exit_code = if report.status == "stalled" || !report.pass { EXIT_STALL } else { EXIT_OK };
    Ok(Outcome { summary, exit_code })
}
