//! Fixed-point verification of the mild formulation on short slabs:
//! `Γ(v)(s) = S(s) v₀ + ∫₀ˢ S(s-σ) b(·, v(σ) + z(σ)) dσ`, iterated on a
//! Chebyshev collocation in time.

use std::sync::Arc;

use super::{nonlinearity_coeffs, RunOptions, Snapshot, SolverConfig, SolverState, Status, Trajectory};
use crate::bessel::EigenBasis;
use crate::dynamics::eval_b;
use crate::error::{Result, ShmfError};
use crate::modal::{weighted_norm, ModalField};
use crate::noise::{standard_normals, NoisePath};
use crate::scalar::Real;
use crate::timequad::{ChebGrid, ExpConvolution};

/// Chebyshev intervals per slab.
pub const SLAB_NODES: usize = 16;
pub const MAX_SWEEPS: usize = 50;
pub const SWEEP_TOL: f64 = 1e-10;

/// Empirical constants of the cubic bounds on `b` and the resulting slab
/// constants `c₁ = K c'`, `c₂ = K c''` with `K = (β/2e)^{β/2} / (1 - β/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConstants<T> {
    /// `sup |b(v)|_H / |v|_β³` over the samples.
    pub c_growth: T,
    /// `sup |b(u) - b(v)|_H / (|u - v|_β (|u|_β² + |v|_β²))` over the samples.
    pub c_lipschitz: T,
    pub c1: T,
    pub c2: T,
}

/// Estimates the constants from `samples` random fields (and pairs) at several
/// amplitudes. Requires `β < 2`.
pub fn empirical_constants<T: Real>(
    basis: &Arc<EigenBasis<T>>,
    beta: T,
    samples: usize,
    seed: u64,
) -> Result<PicardConstants<T>> {
    if !(beta < T::lit(2.0)) {
        return Err(ShmfError::Validation(format!(
            "the slab recipe needs beta < 2, got {beta}"
        )));
    }
    let n = basis.n_modes();
    let zeros = basis.zeros();
    let random_field = |event: u64| -> ModalField<T> {
        let xi = standard_normals(seed, 0, event, n);
        let coeffs = xi
            .iter()
            .zip(zeros)
            .map(|(&g, &x)| T::lit(g) * x.powf(-(beta + T::lit(1.5))))
            .collect();
        let f = ModalField::from_coeffs(basis, coeffs).expect("n coefficients");
        let norm = f.norm_beta(beta);
        f.scale(T::one() / norm)
    };
    let amplitudes = [1e-2, 1e-1, 0.5, 1.0, 2.0];
    let mut c_growth = T::zero();
    let mut c_lipschitz = T::zero();
    for i in 0..samples as u64 {
        let u = random_field(2 * i);
        let w = random_field(2 * i + 1);
        for &a in &amplitudes {
            let a = T::lit(a);
            let ua = u.scale(a);
            let bu = eval_b(&ua);
            c_growth = c_growth.max(bu.norm_h() / (a * a * a));
            let va = w.scale(a * T::lit(0.7)).lincomb(T::one(), &ua, T::lit(0.5))?;
            let bv = eval_b(&va);
            let diff: Vec<T> = bu
                .grid_values()
                .iter()
                .zip(bv.grid_values())
                .map(|(&p, &q)| p - q)
                .collect();
            let dn = diff
                .iter()
                .zip(basis.quad_weights())
                .map(|(&d, &wt)| wt * d * d)
                .fold(T::zero(), |s, x| s + x)
                .sqrt();
            let nu = ua.norm_beta(beta);
            let nv = va.norm_beta(beta);
            let sep = (&ua - &va).norm_beta(beta);
            if sep > T::zero() {
                c_lipschitz = c_lipschitz.max(dn / (sep * (nu * nu + nv * nv)));
            }
        }
    }
    let half = beta / T::lit(2.0);
    let k = (half / T::E()).powf(half) / (T::one() - half);
    Ok(PicardConstants {
        c_growth,
        c_lipschitz,
        c1: k * c_growth,
        c2: k * c_lipschitz,
    })
}

/// `T★ = min(1/(4c₁R³), 1/(8c₂R²))^{1/(1-β/2)}`.
pub fn t_star<T: Real>(consts: &PicardConstants<T>, r: T, beta: T) -> T {
    let a = T::one() / (T::lit(4.0) * consts.c1 * r * r * r);
    let b = T::one() / (T::lit(8.0) * consts.c2 * r * r);
    a.min(b).powf(T::one() / (T::one() - beta / T::lit(2.0)))
}

#[derive(Debug, Clone)]
pub struct PicardReport<T: Real> {
    pub v_end: ModalField<T>,
    pub z_end: Vec<T>,
    pub sweeps: usize,
    /// `‖v^{m+1} - v^m‖` per sweep.
    pub differences: Vec<T>,
    /// Ratios of successive differences.
    pub ratios: Vec<T>,
    /// Largest `|v(s_i)|_β` and `|z(s_i)|_β` over the collocation nodes.
    pub v_sup: T,
    pub z_sup: T,
}

/// Iterates `Γ` on `[t0, t0 + slab]` starting from `S(s) v0`.
pub fn picard_slab<T: Real>(
    v0: &ModalField<T>,
    path: &mut dyn NoisePath<T>,
    t0: T,
    slab: T,
    beta: T,
    linear: bool,
) -> Result<PicardReport<T>> {
    let basis = Arc::clone(v0.basis());
    let n = basis.n_modes();
    let grid = ChebGrid::new(T::zero(), slab, SLAB_NODES);
    let nodes = grid.nodes().to_vec();
    let m = nodes.len();
    let zs: Vec<Vec<T>> = nodes
        .iter()
        .map(|&s| path.sample(t0 + s))
        .collect::<Result<_>>()?;

    // W[k][i][j] = ∫₀^{s_i} e^{-a_k (s_i - σ)} ℓ_j(σ) dσ
    let conv = ExpConvolution::<T>::new(16);
    let mut weights = vec![T::zero(); n * m * m];
    for (k, &a) in basis.eigenvalues().iter().enumerate() {
        for (i, &s) in nodes.iter().enumerate() {
            for (sigma, w) in conv.rule(a, s) {
                let row = grid.lagrange_row(sigma);
                let base = (k * m + i) * m;
                for (j, &l) in row.iter().enumerate() {
                    weights[base + j] += w * l;
                }
            }
        }
    }
    let free: Vec<Vec<T>> = nodes
        .iter()
        .map(|&s| v0.semigroup(s).map(ModalField::into_coeffs))
        .collect::<Result<_>>()?;

    let mut current = free.clone();
    let mut differences = Vec::new();
    let mut ratios = Vec::new();
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let bs: Vec<Vec<T>> = if linear {
            vec![vec![T::zero(); n]; m]
        } else {
            current
                .iter()
                .zip(&zs)
                .map(|(v, z)| {
                    let h: Vec<T> = v.iter().zip(z).map(|(&a, &b)| a + b).collect();
                    nonlinearity_coeffs(&basis, &h)
                })
                .collect()
        };
        let mut next = free.clone();
        for k in 0..n {
            for i in 0..m {
                let base = (k * m + i) * m;
                let mut acc = T::zero();
                for j in 0..m {
                    acc += weights[base + j] * bs[j][k];
                }
                next[i][k] += acc;
            }
        }
        let diff = next
            .iter()
            .zip(&current)
            .map(|(a, b)| {
                let d: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
                weighted_norm(basis.zeros(), &d, beta)
            })
            .fold(T::zero(), |acc, x| acc.max(x));
        if let Some(&prev) = differences.last() {
            if prev > T::zero() {
                ratios.push(diff / prev);
            }
        }
        differences.push(diff);
        current = next;
        if !diff.is_finite() {
            return Err(ShmfError::ContractionFailure {
                sweeps,
                last_ratio: f64::INFINITY,
            });
        }
        if diff < T::lit(SWEEP_TOL) {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(ShmfError::ContractionFailure {
                sweeps,
                last_ratio: ratios.last().map_or(f64::NAN, |r| r.to_f64_lossy()),
            });
        }
    }
    let v_sup = current
        .iter()
        .map(|v| weighted_norm(basis.zeros(), v, beta))
        .fold(T::zero(), |a, b| a.max(b));
    let z_sup = zs
        .iter()
        .map(|z| weighted_norm(basis.zeros(), z, beta))
        .fold(T::zero(), |a, b| a.max(b));
    Ok(PicardReport {
        v_end: ModalField::from_coeffs(&basis, current.pop().expect("nodes"))?,
        z_end: zs.last().expect("nodes").clone(),
        sweeps,
        differences,
        ratios,
        v_sup,
        z_sup,
    })
}

/// Advances `state` by one slab of length at most `T★`, halving the slab on
/// contraction failure.
pub fn step_picard<T: Real>(
    state: &SolverState<T>,
    cfg: &SolverConfig<T>,
    consts: &PicardConstants<T>,
    path: &mut dyn NoisePath<T>,
    linear: bool,
) -> Result<(SolverState<T>, PicardReport<T>)> {
    let beta = cfg.beta;
    let z_norm = weighted_norm(state.v.basis().zeros(), &state.z, beta);
    let r0 = state.v.norm_beta(beta).max(z_norm) + T::one();
    let mut slab = t_star(consts, r0, beta).min(cfg.t_end - state.t);
    let mut halvings = 0;
    loop {
        match picard_slab(&state.v, path, state.t, slab, beta, linear) {
            Ok(report) => {
                let r = state.v.norm_beta(beta).max(report.z_sup) + T::one();
                let allowed = t_star(consts, r, beta);
                if allowed < slab {
                    slab = allowed;
                    continue;
                }
                let mut next = state.clone();
                next.t = state.t + slab;
                next.v = report.v_end.clone();
                next.z = report.z_end.clone();
                next.dt = slab;
                next.accepted += 1;
                next.refresh(cfg);
                path.commit(next.t);
                return Ok((next, report));
            }
            Err(ShmfError::ContractionFailure { .. }) if halvings < 20 => {
                slab /= T::lit(2.0);
                halvings += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

pub(super) fn run_picard<T: Real>(
    h0: &ModalField<T>,
    cfg: &SolverConfig<T>,
    path: &mut dyn NoisePath<T>,
    opts: &RunOptions<T>,
) -> Result<Trajectory<T>> {
    let consts = empirical_constants(h0.basis(), cfg.beta, 32, 0)?;
    let mut state = SolverState::new(h0, cfg);
    let mut snapshots: Vec<Snapshot<T>> = vec![state.snapshot()];
    let end_tol = cfg.t_end * T::epsilon() * T::lit(16.0);
    while state.t < cfg.t_end - end_tol {
        if state.accepted >= cfg.max_steps {
            state.status = Status::Stalled;
            state.message = Some(format!("slab budget {} exhausted at t = {}", cfg.max_steps, state.t));
            break;
        }
        match step_picard(&state, cfg, &consts, path, opts.linear) {
            Ok((next, _)) => state = next,
            Err(ShmfError::ContractionFailure { sweeps, last_ratio }) => {
                state.status = Status::Stalled;
                state.message = Some(format!(
                    "no contraction after {sweeps} sweeps (ratio {last_ratio}) at t = {}",
                    state.t
                ));
                break;
            }
            Err(e) => return Err(e),
        }
        snapshots.push(state.snapshot());
    }
    if state.status == Status::Running {
        state.status = Status::Completed;
    }
    if let Some(last) = snapshots.last_mut() {
        last.status = state.status;
    }
    Ok(Trajectory {
        snapshots,
        records: Vec::new(),
        tail: vec![(state.t, state.h())],
        status: state.status,
        tau: None,
        final_time: state.t,
        final_h: state.h(),
        accepted: state.accepted,
        rejected: 0,
        message: state.message,
    })
}
