//! Batch run of the subsolution checkers.

use serde::Serialize;
use shmf_core::blowup::{
    check_harmonic_identities, delta_bar, delta_sharpness_probe, inequality_grid, min_f_phi_theta, mu_bar,
    verify_differential_inequality, InequalityReport, SharpnessReport, SubsolutionParams,
};
use shmf_core::Result;

use crate::config::VerifyBlock;

pub const HARMONIC_LIMIT: f64 = 1e-5;
pub const SLACK_LIMIT: f64 = -1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckLine>,
    pub inequality: Vec<InequalityReport>,
    pub sharpness: Vec<SharpnessReport>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn run_verify(block: &VerifyBlock) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let n = block.n_r_harmonic;
    let rs: Vec<f64> = (1..=n).map(|j| j as f64 / (n + 1) as f64).collect();
    for &eps in &block.epsilons {
        let mu = mu_bar(eps)?;
        for &lambda in &block.lambdas {
            let res = check_harmonic_identities(lambda, eps, mu, &rs, block.fd_step);
            checks.push(CheckLine {
                name: format!("harmonic lambda={lambda} eps={eps}"),
                value: res,
                limit: HARMONIC_LIMIT,
                pass: res <= HARMONIC_LIMIT,
            });
        }
    }
    let mut inequality = Vec::new();
    let mut sharpness = Vec::new();
    for &eps in &block.epsilons {
        let mu = mu_bar(eps)?;
        let params = SubsolutionParams { epsilon: eps, mu, delta: delta_bar(eps, mu), lambda0: block.lambda0, xi: None };
        params.validate()?;
        let (ts, rs) = inequality_grid(params.t_lambda(), block.n_t, block.n_r);
        let rep = verify_differential_inequality(&params, |_, _| 0.0, &ts, &rs)?;
        checks.push(CheckLine {
            name: format!("slack eps={eps}"),
            value: rep.min_slack,
            limit: SLACK_LIMIT,
            pass: rep.precondition_ok && rep.min_slack >= SLACK_LIMIT,
        });
        inequality.push(rep);
        let sharp = delta_sharpness_probe(eps, mu, block.lambda0, block.n_t, block.n_r, block.max_doublings)?;
        checks.push(CheckLine {
            name: format!("sharpness eps={eps}"),
            value: sharp.negative_at.unwrap_or(f64::NAN),
            limit: 2f64.powi(block.max_doublings as i32),
            pass: sharp.negative_at.is_some(),
        });
        sharpness.push(sharp);
    }
    let fmin = min_f_phi_theta::<f64>(block.f_grid);
    checks.push(CheckLine { name: "f_phi_theta min".into(), value: fmin, limit: SLACK_LIMIT, pass: fmin >= SLACK_LIMIT });
    Ok(VerifyReport { checks, inequality, sharpness })
}
