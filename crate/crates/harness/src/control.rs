//! Steered run from `h₀` to `h₁`.

use serde::Serialize;
use shmf_core::blowup::{build_control, ControlOptions};
use shmf_core::solver::{run, RunOptions, Snapshot};
use shmf_core::Result;

use crate::config::{ControlBlock, Experiment};

/// Admissible `|h(T₁) - h₁|_β / (|h₀|_β + |h₁|_β)`.
pub const CONTROL_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct ControlReport {
    pub t1: f64,
    pub linear: bool,
    pub beta: f64,
    pub norm_h0: f64,
    pub norm_h1: f64,
    pub error: f64,
    pub rel_error: f64,
    pub limit: f64,
    pub status: &'static str,
    pub pass: bool,
}

pub fn run_control(exp: &Experiment, block: &ControlBlock) -> Result<(ControlReport, Vec<Snapshot<f64>>)> {
    let h0 = match &block.source {
        Some(src) => src.build(&exp.basis),
        None => exp.h0.clone(),
    };
    let h1 = block.target.build(&exp.basis);
    let mut path = build_control(&h0, &h1, block.t1, ControlOptions { linear: block.linear })?;
    let mut cfg = exp.config.solver_config(block.t1);
    cfg.tol = block.tol;
    let tr = run(&h0, &cfg, &mut path, &RunOptions { linear: block.linear, ..Default::default() })?;
    let beta = cfg.beta;
    let (n0, n1) = (h0.norm_beta(beta), h1.norm_beta(beta));
    let error = (&tr.final_h - &h1).norm_beta(beta);
    let scale = n0 + n1;
    let rel_error = if scale > 0.0 { error / scale } else { error };
    let report = ControlReport {
        t1: block.t1,
        linear: block.linear,
        beta,
        norm_h0: n0,
        norm_h1: n1,
        error,
        rel_error,
        limit: CONTROL_LIMIT,
        status: tr.status.as_str(),
        pass: rel_error <= CONTROL_LIMIT,
    };
    Ok((report, tr.snapshots))
}
