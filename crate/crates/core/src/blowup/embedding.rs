//! Empirical constants of the weighted embedding `V_β ↪ { f : f/r^ν ∈ L^p(r dr) }`.

use serde::Serialize;

use crate::bessel::gauss_legendre;
use crate::error::{Result, ShmfError};
use crate::modal::ModalField;
use crate::scalar::Real;

/// Relative change between successive quadrature refinements regarded as converged.
pub const REFINE_TOL: f64 = 1e-3;
const MAX_REFINEMENTS: usize = 6;

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingReport {
    pub beta: f64,
    pub nu: f64,
    /// `None` stands for `p = ∞`.
    pub p: Option<f64>,
    /// `|f/r^ν|_{L^p}` per sample.
    pub weighted_norms: Vec<f64>,
    /// `|f/r^ν|_{L^p} / |f|_β` per sample.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub all_finite: bool,
    /// Largest relative change at the last refinement.
    pub max_rel_change: f64,
    pub stable: bool,
}

/// Checks the parameter window: `p ≥ 1`; for finite `p`, `ν < 2/p + 1` and
/// `β > max(1 + ν - 2/p, 1/2)`; for `p = ∞`, `ν ≤ 1` and `β > max(1 + ν, 1/2)`.
pub fn embedding_window<T: Real>(beta: T, nu: T, p: Option<T>) -> Result<()> {
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let (inv, nu_ok) = match p {
        Some(p) => {
            if !(p >= T::one() && p.is_finite()) {
                return Err(ShmfError::Validation(format!("p = {p} must lie in [1, ∞)")));
            }
            (two / p, nu < two / p + T::one())
        }
        None => (T::zero(), nu <= T::one()),
    };
    if !nu_ok {
        return Err(ShmfError::Validation(format!("nu = {nu} outside the embedding window")));
    }
    let beta_min = (T::one() + nu - inv).max(half);
    if !(beta > beta_min) {
        return Err(ShmfError::Validation(format!("beta = {beta} must exceed {beta_min}")));
    }
    Ok(())
}

/// Panels `[2^{-j-1}, 2^{-j}]`, `j < levels`, plus `[0, 2^{-levels}]`, each with
/// an `order`-point Gauss-Legendre rule.
fn graded_rule<T: Real>(levels: usize, order: usize) -> Vec<(T, T)> {
    let (x, w) = gauss_legendre::<T>(order);
    let mut out = Vec::with_capacity((levels + 1) * order);
    let mut hi = T::one();
    for j in 0..=levels {
        let lo = if j == levels { T::zero() } else { hi / T::lit(2.0) };
        let mid = (hi + lo) / T::lit(2.0);
        let half = (hi - lo) / T::lit(2.0);
        for (&xi, &wi) in x.iter().zip(&w) {
            out.push((mid + half * xi, half * wi));
        }
        hi = lo;
    }
    out
}

fn weighted_norm_at<T: Real>(f: &ModalField<T>, nu: T, p: Option<T>, level: usize) -> T {
    let levels = 12 + 4 * level;
    let order = 8 << level;
    let rule = graded_rule::<T>(levels, order);
    match p {
        Some(p) => {
            let s = rule.iter().fold(T::zero(), |acc, &(r, w)| {
                acc + w * r * (f.value_at(r) / r.powf(nu)).abs().powf(p)
            });
            s.powf(T::one() / p)
        }
        None => rule
            .iter()
            .fold(T::zero(), |acc, &(r, _)| acc.max((f.value_at(r) / r.powf(nu)).abs())),
    }
}

/// Computes `|f/r^ν|_{L^p(r dr)}` for each sample, refining the graded
/// quadrature until successive values differ by less than [`REFINE_TOL`].
pub fn check_embedding<T: Real>(
    beta: T,
    nu: T,
    p: Option<T>,
    samples: &[ModalField<T>],
) -> Result<EmbeddingReport> {
    embedding_window(beta, nu, p)?;
    let mut weighted_norms = Vec::with_capacity(samples.len());
    let mut ratios = Vec::with_capacity(samples.len());
    let mut max_rel_change = T::zero();
    for f in samples {
        let mut prev = weighted_norm_at(f, nu, p, 0);
        let mut change = T::infinity();
        for level in 1..=MAX_REFINEMENTS {
            let next = weighted_norm_at(f, nu, p, level);
            change = if next == T::zero() && prev == T::zero() {
                T::zero()
            } else {
                (next - prev).abs() / next.abs().max(prev.abs())
            };
            prev = next;
            if change < T::lit(REFINE_TOL) {
                break;
            }
        }
        max_rel_change = max_rel_change.max(change);
        weighted_norms.push(prev.to_f64_lossy());
        ratios.push((prev / f.norm_beta(beta)).to_f64_lossy());
    }
    let all_finite = weighted_norms.iter().chain(&ratios).all(|v| v.is_finite());
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(EmbeddingReport {
        beta: beta.to_f64_lossy(),
        nu: nu.to_f64_lossy(),
        p: p.map(|v| v.to_f64_lossy()),
        weighted_norms,
        ratios,
        max_ratio,
        all_finite,
        max_rel_change: max_rel_change.to_f64_lossy(),
        stable: max_rel_change < T::lit(REFINE_TOL),
    })
}
