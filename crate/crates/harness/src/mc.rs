//! Monte Carlo estimate of `P(τ ≤ t*)`.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use shmf_core::noise::{NoisePath, OuPath, ZeroPath};
use shmf_core::solver::{run, RunOptions, Snapshot, Status};
use shmf_core::Result;

use crate::config::Experiment;

/// Two-sided 95 % normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Outcome of one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub path_index: u64,
    pub seed: u64,
    pub status: &'static str,
    pub tau: Option<f64>,
    pub final_time: f64,
    /// `∂r h(·, 0)` at the final time.
    pub final_grad0: f64,
    pub accepted: usize,
    pub rejected: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PathRun {
    pub record: PathRecord,
    pub status: Status,
    pub snapshots: Vec<Snapshot<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McResult {
    /// Paths requested.
    pub n_requested: u64,
    /// Paths counted, i.e. requested minus stalled.
    pub n_paths: u64,
    pub n_blowup: u64,
    pub n_stalled: u64,
    pub p_hat: f64,
    pub wilson: (f64, f64),
    pub paths: Vec<PathRecord>,
    #[serde(skip)]
    pub runtime: Duration,
}

/// Wilson score interval for `k` successes in `n` trials. `n = 0` gives `[0, 1]`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Runs path `path_index` of the experiment up to `t*`.
pub fn simulate_path(exp: &Experiment, path_index: u64, keep_snapshots: bool) -> Result<PathRun> {
    let cfg = &exp.config;
    let mut solver = cfg.solver_config(cfg.mc.t_star);
    if !keep_snapshots {
        solver.snapshot_every = 0;
    } else if solver.snapshot_every == 0 {
        solver.snapshot_every = 1;
    }
    let seed = cfg.mc.seed;
    let mut path: Box<dyn NoisePath<f64>> = match &exp.spectrum {
        Some(sp) => Box::new(OuPath::new(Arc::clone(sp), seed, path_index)),
        None => Box::new(ZeroPath::new(exp.basis.n_modes())),
    };
    let tr = run(&exp.h0, &solver, path.as_mut(), &RunOptions::default())?;
    let record = PathRecord {
        path_index,
        seed,
        status: tr.status.as_str(),
        tau: tr.tau,
        final_time: tr.final_time,
        final_grad0: tr.final_h.gradient_at_origin(),
        accepted: tr.accepted,
        rejected: tr.rejected,
        message: tr.message.clone(),
    };
    Ok(PathRun { record, status: tr.status, snapshots: tr.snapshots })
}

/// Runs `mc.n_paths` paths on `workers` threads. Results are merged by path
/// index, so the outcome does not depend on the worker count. Stalled paths
/// are excluded from `n_paths` and reported in `n_stalled`.
pub fn run_monte_carlo(exp: &Experiment, workers: usize, keep_snapshots: bool) -> Result<(McResult, Vec<PathRun>)> {
    let start = Instant::now();
    let n = exp.config.mc.n_paths;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| shmf_core::ShmfError::Internal(format!("thread pool: {e}")))?;
    let runs: Vec<PathRun> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|p| simulate_path(exp, p, keep_snapshots))
            .collect::<Result<Vec<_>>>()
    })?;
    let t_star = exp.config.mc.t_star;
    let n_stalled = runs.iter().filter(|r| r.status == Status::Stalled).count() as u64;
    let n_blowup = runs
        .iter()
        .filter(|r| r.status == Status::BlownUp && r.record.tau.is_some_and(|t| t <= t_star))
        .count() as u64;
    let n_paths = n - n_stalled;
    let p_hat = if n_paths == 0 { f64::NAN } else { n_blowup as f64 / n_paths as f64 };
    let result = McResult {
        n_requested: n,
        n_paths,
        n_blowup,
        n_stalled,
        p_hat,
        wilson: wilson_interval(n_blowup, n_paths, Z95),
        paths: runs.iter().map(|r| r.record.clone()).collect(),
        runtime: start.elapsed(),
    };
    Ok((result, runs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_edges() {
        assert_eq!(wilson_interval(0, 0, Z95), (0.0, 1.0));
        let (lo, hi) = wilson_interval(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.35);
        let (lo, hi) = wilson_interval(10, 10, Z95);
        assert!(lo > 0.65 && lo < 1.0);
        assert_eq!(hi, 1.0);
    }
}
