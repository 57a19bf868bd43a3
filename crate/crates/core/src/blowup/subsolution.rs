//! Parabolae `χ_k`, the profiles `φ_λ`, `θ_{ε,μ}`, the shrinking scale `λ(t)`
//! and the subsolution `ψ = φ_{λ(t)} + θ_{ε,μ} + S(t)ξ`.

use serde::Serialize;

use crate::bessel::EigenBasis;
use crate::dynamics::b_pointwise;
use crate::error::{domain, Result, ShmfError};
use crate::modal::ModalField;
use crate::scalar::Real;
use std::sync::Arc;

/// Right end of the working interval `J = [0, 1/2]`.
pub const WORKING_RADIUS: f64 = 0.5;

/// `χ_k(r) = k r (1 - r²)(2 - r²)`.
pub fn chi<T: Real>(k: T, r: T) -> T {
    let r2 = r * r;
    k * r * (T::one() - r2) * (T::lit(2.0) - r2)
}

/// Projection of `χ_k` onto the basis.
pub fn chi_field<T: Real>(basis: &Arc<EigenBasis<T>>, k: T) -> ModalField<T> {
    ModalField::project(basis, |r| chi(k, r))
}

/// `φ_λ(r) = arccos((λ² - r²)/(λ² + r²)) = 2 atan(r/λ)`.
pub fn phi_lambda<T: Real>(lambda: T, r: T) -> T {
    T::lit(2.0) * (r / lambda).atan()
}

/// `θ_{ε,μ}(r) = arccos((μ² - r^{2+2ε})/(μ² + r^{2+2ε})) = 2 atan(r^{1+ε}/μ)`.
pub fn theta_eps_mu<T: Real>(eps: T, mu: T, r: T) -> T {
    T::lit(2.0) * (r.powf(T::one() + eps) / mu).atan()
}

/// `T_{λ₀} = λ₀^{1-ε} / ((1-ε) δ)`.
pub fn t_lambda<T: Real>(eps: T, delta: T, lambda0: T) -> T {
    lambda0.powf(T::one() - eps) / ((T::one() - eps) * delta)
}

/// `sup_{s>0} s^{2-ε}/(1 + s²)`, attained at `s² = (2-ε)/ε`.
pub fn sup_ratio<T: Real>(eps: T) -> T {
    let s2 = (T::lit(2.0) - eps) / eps;
    s2.powf((T::lit(2.0) - eps) / T::lit(2.0)) / (T::one() + s2)
}

/// `δ̄(ε, μ) = ε μ / ((μ² + 1) sup_s s^{2-ε}/(1 + s²))`.
pub fn delta_bar<T: Real>(eps: T, mu: T) -> T {
    eps * mu / ((mu * mu + T::one()) * sup_ratio(eps))
}

/// Smallest `μ` with `cos θ_{ε,μ} ≥ 1/(1+ε)` on `[0, 1/2]`, in closed form.
/// `θ` increases in `r`, so the condition binds at `r = 1/2`.
pub fn mu_bar_closed<T: Real>(eps: T) -> T {
    let half_angle = (T::one() / (T::one() + eps)).acos() / T::lit(2.0);
    T::lit(WORKING_RADIUS).powf(T::one() + eps) / half_angle.tan()
}

/// Grid points per decade of the `μ̄` scan.
pub const MU_SCAN_PER_DECADE: usize = 1000;

/// Smallest `μ` on the log grid `10^{i/1000}`, `μ ∈ [1e-4, 1e4]`, for which
/// `cos θ_{ε,μ}(r) ≥ 1/(1+ε)` at 201 equispaced points of `[0, 1/2]`.
pub fn mu_bar<T: Real>(eps: T) -> Result<T> {
    if !(eps > T::zero() && eps < T::one()) {
        return Err(domain("mu_bar", format!("epsilon {eps} outside (0, 1)")));
    }
    let bound = T::one() / (T::one() + eps);
    let rs: Vec<T> = (0..=200)
        .map(|i| T::lit(WORKING_RADIUS * i as f64 / 200.0))
        .collect();
    let ok = |mu: T| rs.iter().all(|&r| theta_eps_mu(eps, mu, r).cos() >= bound);
    let lo = -4 * MU_SCAN_PER_DECADE as i64;
    let hi = 4 * MU_SCAN_PER_DECADE as i64;
    let mu_at = |i: i64| T::lit(10f64.powf(i as f64 / MU_SCAN_PER_DECADE as f64));
    // cos θ is monotone in μ, so bisect on the grid index
    if !ok(mu_at(hi)) {
        return Err(ShmfError::Internal("mu scan range exhausted".into()));
    }
    if ok(mu_at(lo)) {
        return Ok(mu_at(lo));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > 1 {
        let m = (a + b) / 2;
        if ok(mu_at(m)) {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(mu_at(b))
}

/// Parameters of the subsolution.
#[derive(Debug, Clone)]
pub struct SubsolutionParams<T: Real> {
    pub epsilon: T,
    pub mu: T,
    pub delta: T,
    pub lambda0: T,
    /// `ξ ≥ 0` on `[0, 1/2]`; `None` means `ξ = 0`.
    pub xi: Option<ModalField<T>>,
}

impl<T: Real> SubsolutionParams<T> {
    /// Checks `ε ∈ (0,1)`, `μ ≥ μ̄(ε)`, `0 < δ ≤ δ̄(ε, μ)`, `λ₀ > 0` and
    /// `ξ ≥ 0` at 201 points of `[0, 1/2]`.
    pub fn validate(&self) -> Result<()> {
        let eps = self.epsilon;
        if !(eps > T::zero() && eps < T::one()) {
            return Err(ShmfError::Validation(format!("epsilon {eps} outside (0, 1)")));
        }
        let mu_min = mu_bar(eps)?;
        if !(self.mu >= mu_min) {
            return Err(ShmfError::Validation(format!("mu {} below mu_bar {mu_min}", self.mu)));
        }
        let d_max = delta_bar(eps, self.mu);
        if !(self.delta > T::zero() && self.delta <= d_max) {
            return Err(ShmfError::Validation(format!(
                "delta {} outside (0, delta_bar = {d_max}]",
                self.delta
            )));
        }
        if !(self.lambda0 > T::zero()) {
            return Err(ShmfError::Validation(format!("lambda0 {} must be positive", self.lambda0)));
        }
        if let Some(xi) = &self.xi {
            for i in 0..=200 {
                let r = T::lit(WORKING_RADIUS * i as f64 / 200.0);
                if xi.value_at(r) < -T::lit(1e-12) {
                    return Err(ShmfError::Validation(format!("xi negative at r = {r}")));
                }
            }
        }
        Ok(())
    }

    pub fn t_lambda(&self) -> T {
        t_lambda(self.epsilon, self.delta, self.lambda0)
    }

    fn xi_value(&self, t: T, r: T) -> Result<T> {
        match &self.xi {
            Some(xi) => Ok(xi.semigroup(t)?.value_at(r)),
            None => Ok(T::zero()),
        }
    }

    /// `(A S(t) ξ)(r) = -Σ x_k² e^{-x_k² t} ξ_k e_k(r)`.
    fn a_xi_value(&self, t: T, r: T) -> Result<T> {
        match &self.xi {
            Some(xi) => Ok(-xi.semigroup(t)?.apply_fractional(T::one()).value_at(r)),
            None => Ok(T::zero()),
        }
    }
}

/// `λ(t) = (λ₀^{1-ε} - (1-ε) δ t)^{1/(1-ε)}`, the solution of `λ' = -δ λ^ε`.
pub fn lambda_of_t<T: Real>(params: &SubsolutionParams<T>, t: T) -> Result<T> {
    let eps = params.epsilon;
    let tl = params.t_lambda();
    if !(t >= T::zero() && t < tl) {
        return Err(domain("lambda_of_t", format!("t = {t} outside [0, T = {tl})")));
    }
    if t == T::zero() {
        return Ok(params.lambda0);
    }
    let base = params.lambda0.powf(T::one() - eps) - (T::one() - eps) * params.delta * t;
    Ok(base.powf(T::one() / (T::one() - eps)))
}

/// `A f(r) = f'' + f'/r - f/r²` with fourth-order central differences of step `h`.
pub fn fd_operator<T: Real>(f: impl Fn(T) -> T, r: T, h: T) -> T {
    let (fm2, fm1, f0, fp1, fp2) = (f(r - h - h), f(r - h), f(r), f(r + h), f(r + h + h));
    let twelve = T::lit(12.0);
    let d2 = (-fp2 + T::lit(16.0) * fp1 - T::lit(30.0) * f0 + T::lit(16.0) * fm1 - fm2) / (twelve * h * h);
    let d1 = (-fp2 + T::lit(8.0) * fp1 - T::lit(8.0) * fm1 + fm2) / (twelve * h);
    d2 + d1 / r - f0 / (r * r)
}

/// Largest residual of `Aφ_λ = (sin 2φ_λ - 2φ_λ)/(2r²)` and
/// `Aθ = ((1+ε)² sin 2θ - 2θ)/(2r²)` over `r_samples`, with `A` by finite
/// differences of step `min(h, r/4)`. A non-finite residual is returned as NaN.
pub fn check_harmonic_identities<T: Real>(lambda: T, eps: T, mu: T, r_samples: &[T], h: T) -> T {
    let two = T::lit(2.0);
    let mut worst = T::zero();
    for &r in r_samples {
        let step = h.min(r / T::lit(4.0));
        let phi = phi_lambda(lambda, r);
        let a_phi = fd_operator(|x| phi_lambda(lambda, x), r, step);
        let rhs_phi = ((two * phi).sin() - two * phi) / (two * r * r);
        let th = theta_eps_mu(eps, mu, r);
        let a_th = fd_operator(|x| theta_eps_mu(eps, mu, x), r, step);
        let k = (T::one() + eps) * (T::one() + eps);
        let rhs_th = (k * (two * th).sin() - two * th) / (two * r * r);
        for res in [(a_phi - rhs_phi).abs(), (a_th - rhs_th).abs()] {
            if !res.is_finite() {
                return T::nan();
            }
            worst = worst.max(res);
        }
    }
    worst
}

/// FD step used by the subsolution checks at radius `r`.
pub fn fd_step<T: Real>(r: T) -> T {
    T::lit(1e-4).min(r / T::lit(50.0))
}

/// `ψ(t, r)` at each radius.
pub fn psi_ansatz<T: Real>(params: &SubsolutionParams<T>, t: T, r_grid: &[T]) -> Result<Vec<T>> {
    let lam = lambda_of_t(params, t)?;
    let sxi = params.xi.as_ref().map(|xi| xi.semigroup(t)).transpose()?;
    Ok(r_grid
        .iter()
        .map(|&r| {
            phi_lambda(lam, r)
                + theta_eps_mu(params.epsilon, params.mu, r)
                + sxi.as_ref().map_or(T::zero(), |f| f.value_at(r))
        })
        .collect())
}

/// `∂r ψ(t, 0) = 2/λ(t) + ∂r(S(t)ξ)(0)`; `θ'(0) = 0` for `ε > 0`.
pub fn psi_gradient_at_origin<T: Real>(params: &SubsolutionParams<T>, t: T) -> Result<T> {
    let lam = lambda_of_t(params, t)?;
    let xi_slope = match &params.xi {
        Some(xi) => xi.semigroup(t)?.gradient_at_origin(),
        None => T::zero(),
    };
    Ok(T::lit(2.0) / lam + xi_slope)
}

/// `∂t ψ = 2 δ λ^ε r/(λ² + r²) + A S(t) ξ`.
pub fn psi_time_derivative<T: Real>(params: &SubsolutionParams<T>, t: T, r: T) -> Result<T> {
    let lam = lambda_of_t(params, t)?;
    let two = T::lit(2.0);
    Ok(two * params.delta * lam.powf(params.epsilon) * r / (lam * lam + r * r) + params.a_xi_value(t, r)?)
}

/// `F_{φ,θ}(x) = 2x - (sin 2(φ+θ+x) - sin 2(φ+θ))`.
pub fn f_phi_theta<T: Real>(phi: T, theta: T, x: T) -> T {
    let two = T::lit(2.0);
    two * x - ((two * (phi + theta + x)).sin() - (two * (phi + theta)).sin())
}

/// Minimum of `F_{φ,θ}(x)` over a grid of `φ, θ ∈ [0, 2π]` and `x ∈ [0, 10]`.
pub fn min_f_phi_theta<T: Real>(n: usize) -> T {
    let mut worst = T::infinity();
    let tau = T::lit(2.0) * T::PI();
    for i in 0..=n {
        let phi = tau * T::from_usize_lossy(i) / T::from_usize_lossy(n);
        for j in 0..=n {
            let th = tau * T::from_usize_lossy(j) / T::from_usize_lossy(n);
            for l in 0..=n {
                let x = T::lit(10.0) * T::from_usize_lossy(l) / T::from_usize_lossy(n);
                worst = worst.min(f_phi_theta(phi, th, x));
            }
        }
    }
    worst
}

/// `γ̄ = π + |θ|_∞ + sup_t |S(t)ξ|_∞`, with the suprema over `[0, 1]` and the
/// given times.
pub fn gamma_bar<T: Real>(params: &SubsolutionParams<T>, t_samples: &[T]) -> Result<T> {
    let theta_sup = theta_eps_mu(params.epsilon, params.mu, T::one());
    let mut xi_sup = T::zero();
    if let Some(xi) = &params.xi {
        for &t in t_samples {
            let s = xi.semigroup(t)?;
            for v in s.synthesize() {
                xi_sup = xi_sup.max(v.abs());
            }
        }
    }
    Ok(T::PI() + theta_sup + xi_sup)
}

/// Outcome of a differential-inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub epsilon: f64,
    pub mu: f64,
    pub delta: f64,
    pub lambda0: f64,
    pub t_lambda: f64,
    pub samples: usize,
    /// `min (Aψ + b(r, ψ + z) - ∂t ψ)` over the samples.
    pub min_slack: f64,
    pub argmin_t: f64,
    pub argmin_r: f64,
    /// `min x(t, r) = S(t)ξ + z` over the samples.
    pub min_x: f64,
    /// Whether `x ≥ 0` held at every sample.
    pub precondition_ok: bool,
}

/// Evaluates `Aψ + b(r, ψ + z) - ∂t ψ` at every `(t, r)` pair; `A` acts on
/// `φ_λ + θ` by finite differences and on `S(t)ξ` spectrally.
pub fn verify_differential_inequality<T: Real>(
    params: &SubsolutionParams<T>,
    z: impl Fn(T, T) -> T,
    t_samples: &[T],
    r_samples: &[T],
) -> Result<InequalityReport> {
    let eps = params.epsilon;
    let mu = params.mu;
    let mut min_slack = T::infinity();
    let (mut at_t, mut at_r) = (T::zero(), T::zero());
    let mut min_x = T::infinity();
    for &t in t_samples {
        let lam = lambda_of_t(params, t)?;
        for &r in r_samples {
            if !(r > T::zero() && r <= T::lit(WORKING_RADIUS)) {
                return Err(domain("verify_differential_inequality", format!("radius {r} outside (0, 1/2]")));
            }
            let xi_v = params.xi_value(t, r)?;
            let zv = z(t, r);
            min_x = min_x.min(xi_v + zv);
            let h = fd_step(r);
            let a_profile = fd_operator(|x| phi_lambda(lam, x) + theta_eps_mu(eps, mu, x), r, h);
            let psi = phi_lambda(lam, r) + theta_eps_mu(eps, mu, r) + xi_v;
            let rhs = a_profile + params.a_xi_value(t, r)? + b_pointwise(r, psi + zv);
            let slack = rhs - psi_time_derivative(params, t, r)?;
            if slack < min_slack {
                min_slack = slack;
                at_t = t;
                at_r = r;
            }
        }
    }
    Ok(InequalityReport {
        epsilon: eps.to_f64_lossy(),
        mu: mu.to_f64_lossy(),
        delta: params.delta.to_f64_lossy(),
        lambda0: params.lambda0.to_f64_lossy(),
        t_lambda: params.t_lambda().to_f64_lossy(),
        samples: t_samples.len() * r_samples.len(),
        min_slack: min_slack.to_f64_lossy(),
        argmin_t: at_t.to_f64_lossy(),
        argmin_r: at_r.to_f64_lossy(),
        min_x: min_x.to_f64_lossy(),
        precondition_ok: min_x >= T::zero(),
    })
}

/// `n_t × n_r` sample: `t_i = 0.99 T i/(n_t - 1)`, `r_j = (1/2) j/n_r`.
pub fn inequality_grid<T: Real>(t_lambda: T, n_t: usize, n_r: usize) -> (Vec<T>, Vec<T>) {
    let ts = (0..n_t)
        .map(|i| T::lit(0.99) * t_lambda * T::from_usize_lossy(i) / T::from_usize_lossy(n_t.max(2) - 1))
        .collect();
    let rs = (1..=n_r)
        .map(|j| T::lit(WORKING_RADIUS) * T::from_usize_lossy(j) / T::from_usize_lossy(n_r))
        .collect();
    (ts, rs)
}

/// Result of the sharpness probe in `δ`.
#[derive(Debug, Clone, Serialize)]
pub struct SharpnessReport {
    pub delta_bar: f64,
    /// `(δ/δ̄, min slack)` for each tried `δ = 2^j δ̄`.
    pub trials: Vec<(f64, f64)>,
    /// First multiple with negative slack.
    pub negative_at: Option<f64>,
}

/// Doubles `δ` beyond `δ̄` (at most `max_doublings` times) until the minimum
/// slack with `z = 0`, `ξ = 0` turns negative.
pub fn delta_sharpness_probe<T: Real>(
    eps: T,
    mu: T,
    lambda0: T,
    n_t: usize,
    n_r: usize,
    max_doublings: usize,
) -> Result<SharpnessReport> {
    let db = delta_bar(eps, mu);
    let mut trials = Vec::new();
    let mut negative_at = None;
    let mut factor = T::one();
    for _ in 0..max_doublings {
        factor = factor + factor;
        let params = SubsolutionParams {
            epsilon: eps,
            mu,
            delta: db * factor,
            lambda0,
            xi: None,
        };
        let (ts, rs) = inequality_grid(params.t_lambda(), n_t, n_r);
        let rep = verify_differential_inequality(&params, |_, _| T::zero(), &ts, &rs)?;
        trials.push((factor.to_f64_lossy(), rep.min_slack));
        if rep.min_slack < 0.0 {
            negative_at = Some(factor.to_f64_lossy());
            break;
        }
    }
    Ok(SharpnessReport {
        delta_bar: db.to_f64_lossy(),
        trials,
        negative_at,
    })
}
