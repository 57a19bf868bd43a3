//! Time integration of `h = v + z`, where `z` is a forcing path and
//! `v' = Av + b(·, v + z)`, `v(0) = h₀`.
//!
//! The production scheme is exponential Euler with step-doubling control.
//! Step sizes are powers of two and every step starts at a multiple of its own
//! length, so a run only visits dyadic times (besides `t_end` and requested
//! record times).

mod picard;

pub use picard::{
    empirical_constants, picard_slab, step_picard, t_star, PicardConstants, PicardReport,
};

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use crate::bessel::EigenBasis;
use crate::dynamics::{corotational_energy, eval_on_grid};
use crate::error::{Result, ShmfError};
use crate::modal::{analyze_into, ModalField};
use crate::noise::NoisePath;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Running,
    BlownUp,
    Completed,
    Stalled,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::BlownUp => "blown_up",
            Status::Completed => "completed",
            Status::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExpoEuler,
    PicardVerify,
}

#[derive(Debug, Clone)]
pub struct SolverConfig<T> {
    /// Regularity index of the monitored norm `|h|_β`.
    pub beta: T,
    pub t_end: T,
    pub dt_init: T,
    pub dt_min: T,
    pub dt_max: T,
    /// Relative tolerance of the step-doubling estimate.
    pub tol: T,
    /// Index of the norm used by the error estimate.
    pub error_beta: T,
    pub safety: T,
    pub grow_limit: T,
    pub shrink_limit: T,
    /// `false` runs fixed steps of `dt_init`.
    pub adaptive: bool,
    /// `G`: gradient at the origin that counts as blown up.
    pub blowup_grad_threshold: T,
    /// Alternative trigger on `|h|_β`; infinite by default.
    pub blowup_norm_threshold: T,
    /// Accepted steps over which `|h|_β` must grow monotonically.
    pub growth_window: usize,
    pub max_steps: usize,
    /// Consecutive steps forced at `dt_min` before the run counts as stalled.
    pub max_floor_steps: usize,
    /// Keep every n-th accepted step as a snapshot (0 keeps none).
    pub snapshot_every: usize,
    pub record_energy: bool,
    pub scheme: Scheme,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            beta: T::lit(2.5),
            t_end: T::one(),
            dt_init: T::lit(2f64.powi(-14)),
            dt_min: T::lit(2f64.powi(-30)),
            dt_max: T::lit(2f64.powi(-4)),
            tol: T::lit(1e-4),
            error_beta: T::one(),
            safety: T::lit(0.8),
            grow_limit: T::lit(2.0),
            shrink_limit: T::lit(0.25),
            adaptive: true,
            blowup_grad_threshold: T::lit(1e3),
            blowup_norm_threshold: T::infinity(),
            growth_window: 5,
            max_steps: 5_000_000,
            max_floor_steps: 10_000,
            snapshot_every: 1,
            record_energy: true,
            scheme: Scheme::ExpoEuler,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(ShmfError::Validation(m));
        if !(self.t_end > T::zero()) {
            return fail(format!("t_end = {} must be positive", self.t_end));
        }
        if !(self.dt_min > T::zero() && self.dt_min < self.dt_init) {
            return fail(format!(
                "need 0 < dt_min < dt_init, got dt_min = {}, dt_init = {}",
                self.dt_min, self.dt_init
            ));
        }
        if !(self.dt_max >= self.dt_init) {
            return fail(format!("dt_max = {} below dt_init = {}", self.dt_max, self.dt_init));
        }
        if !(self.tol > T::zero()) {
            return fail(format!("tol = {} must be positive", self.tol));
        }
        if !(self.blowup_grad_threshold > T::zero() && self.blowup_norm_threshold > T::zero()) {
            return fail("blow-up thresholds must be positive".into());
        }
        if !(self.safety > T::zero() && self.safety <= T::one()) {
            return fail(format!("safety = {} outside (0, 1]", self.safety));
        }
        if !(self.grow_limit >= T::one() && self.shrink_limit > T::zero() && self.shrink_limit < T::one()) {
            return fail("growth clamp must be >= 1 and shrink clamp in (0, 1)".into());
        }
        if self.growth_window == 0 {
            return fail("growth_window must be positive".into());
        }
        Ok(())
    }
}

/// Diagnostics at one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot<T> {
    pub t: T,
    pub dt: T,
    pub norm_beta: T,
    pub grad0: T,
    pub energy: T,
    pub status: Status,
}

#[derive(Debug, Clone)]
pub struct SolverState<T: Real> {
    pub t: T,
    pub v: ModalField<T>,
    /// Coefficients of `z(t)`.
    pub z: Vec<T>,
    /// Step proposed for the next attempt.
    pub dt: T,
    pub status: Status,
    pub norm_beta: T,
    pub grad0: T,
    pub energy: T,
    /// The last accepted step was forced at `dt_min`.
    pub at_floor: bool,
    pub floor_run: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub norm_history: VecDeque<T>,
    pub tau: Option<T>,
    pub message: Option<String>,
}

impl<T: Real> SolverState<T> {
    pub fn new(h0: &ModalField<T>, cfg: &SolverConfig<T>) -> Self {
        let mut s = Self {
            t: T::zero(),
            v: h0.clone(),
            z: vec![T::zero(); h0.n_modes()],
            dt: pow2_floor(cfg.dt_init),
            status: Status::Running,
            norm_beta: T::zero(),
            grad0: T::zero(),
            energy: T::zero(),
            at_floor: false,
            floor_run: 0,
            accepted: 0,
            rejected: 0,
            norm_history: VecDeque::new(),
            tau: None,
            message: None,
        };
        s.refresh(cfg);
        s
    }

    /// `h = v + z`.
    pub fn h(&self) -> ModalField<T> {
        let coeffs = self
            .v
            .coeffs()
            .iter()
            .zip(&self.z)
            .map(|(&a, &b)| a + b)
            .collect();
        ModalField::from_coeffs(self.v.basis(), coeffs).expect("v and z share the basis")
    }

    fn refresh(&mut self, cfg: &SolverConfig<T>) {
        let h = self.h();
        self.norm_beta = h.norm_beta(cfg.beta);
        self.grad0 = h.gradient_at_origin();
        self.energy = if cfg.record_energy {
            corotational_energy(&h)
        } else {
            T::nan()
        };
        self.norm_history.push_back(self.norm_beta);
        while self.norm_history.len() > cfg.growth_window + 1 {
            self.norm_history.pop_front();
        }
    }

    pub fn snapshot(&self) -> Snapshot<T> {
        Snapshot {
            t: self.t,
            dt: self.dt,
            norm_beta: self.norm_beta,
            grad0: self.grad0,
            energy: self.energy,
            status: self.status,
        }
    }
}

/// Blow-up predicate: the gradient at the origin (or `|h|_β`) has crossed its
/// threshold, the controller has been driven to `dt_min`, and `|h|_β` grew at
/// each of the last `growth_window` accepted steps.
pub fn detect_blowup<T: Real>(state: &SolverState<T>, cfg: &SolverConfig<T>) -> Status {
    if state.status != Status::Running {
        return state.status;
    }
    let large = state.grad0.abs() >= cfg.blowup_grad_threshold
        || state.norm_beta >= cfg.blowup_norm_threshold;
    let growing = state.norm_history.len() == cfg.growth_window + 1
        && state
            .norm_history
            .iter()
            .zip(state.norm_history.iter().skip(1))
            .all(|(a, b)| b > a);
    if large && state.at_floor && growing {
        Status::BlownUp
    } else {
        Status::Running
    }
}

/// Cached per-mode factors `e^{-aΔ}` and `Δ φ₁(-aΔ) = (1 - e^{-aΔ})/a`.
#[derive(Debug, Default)]
pub struct PropagatorCache<T> {
    map: HashMap<u64, (Vec<T>, Vec<T>)>,
}

impl<T: Real> PropagatorCache<T> {
    pub fn new() -> Self {
        Self { map: HashMap::new() }
    }

    fn get(&mut self, basis: &EigenBasis<T>, dt: T) -> &(Vec<T>, Vec<T>) {
        if self.map.len() > 256 {
            self.map.clear();
        }
        self.map
            .entry(dt.to_f64_lossy().to_bits())
            .or_insert_with(|| propagators(basis.eigenvalues(), dt))
    }
}

pub fn propagators<T: Real>(eigenvalues: &[T], dt: T) -> (Vec<T>, Vec<T>) {
    eigenvalues
        .iter()
        .map(|&a| {
            let w = -a * dt;
            let decay = w.exp();
            // Δ φ₁(w) with φ₁(w) = (e^w - 1)/w
            let phi_dt = if w == T::zero() { dt } else { w.exp_m1() / w * dt };
            (decay, phi_dt)
        })
        .unzip()
}

/// Coefficients of `b(·, h)` for modal `h`.
pub fn nonlinearity_coeffs<T: Real>(basis: &Arc<EigenBasis<T>>, h: &[T]) -> Vec<T> {
    let grid = crate::modal::synthesize_with(basis.eval_matrix(), basis.n_modes(), h);
    let b = eval_on_grid(basis, &grid);
    analyze_into(basis, b.grid_values())
}

/// One exponential Euler step `v_k ← e^{-x_k²Δ} v_k + Δ φ₁(-x_k²Δ) b_k`, with
/// `b_k` the coefficients of `b(·, v + z)` at the start of the step.
pub fn step_expo_euler<T: Real>(v: &ModalField<T>, z: &[T], dt: T) -> ModalField<T> {
    let basis = v.basis();
    let h: Vec<T> = v.coeffs().iter().zip(z).map(|(&a, &b)| a + b).collect();
    let b = nonlinearity_coeffs(basis, &h);
    let (decay, phi) = propagators(basis.eigenvalues(), dt);
    let coeffs = expo_update(v.coeffs(), &b, &decay, &phi);
    ModalField::from_coeffs(basis, coeffs).expect("same basis")
}

fn expo_update<T: Real>(v: &[T], b: &[T], decay: &[T], phi: &[T]) -> Vec<T> {
    v.iter()
        .zip(b)
        .zip(decay.iter().zip(phi))
        .map(|((&vk, &bk), (&d, &p))| d * vk + p * bk)
        .collect()
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub snapshots: Vec<Snapshot<T>>,
    /// `h` at each requested record time that was reached.
    pub records: Vec<(T, ModalField<T>)>,
    /// `h` at the last `growth_window + 1` accepted steps.
    pub tail: Vec<(T, ModalField<T>)>,
    pub status: Status,
    pub tau: Option<T>,
    pub final_time: T,
    pub final_h: ModalField<T>,
    pub accepted: usize,
    pub rejected: usize,
    pub message: Option<String>,
}

/// Evolution options beyond the solver configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions<T> {
    /// Times at which the solver lands exactly and stores `h`.
    pub record_times: Vec<T>,
    /// Replace `b` by zero (linear heat flow).
    pub linear: bool,
}

/// Advances `h₀` until `t_end`, blow-up or stall.
pub fn run<T: Real>(
    h0: &ModalField<T>,
    cfg: &SolverConfig<T>,
    path: &mut dyn NoisePath<T>,
    opts: &RunOptions<T>,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    if !h0.is_finite() {
        return Err(ShmfError::Validation("initial datum is not finite".into()));
    }
    match cfg.scheme {
        Scheme::ExpoEuler => run_expo_euler(h0, cfg, path, opts),
        Scheme::PicardVerify => picard::run_picard(h0, cfg, path, opts),
    }
}

fn run_expo_euler<T: Real>(
    h0: &ModalField<T>,
    cfg: &SolverConfig<T>,
    path: &mut dyn NoisePath<T>,
    opts: &RunOptions<T>,
) -> Result<Trajectory<T>> {
    let basis = Arc::clone(h0.basis());
    let n = basis.n_modes();
    let mut state = SolverState::new(h0, cfg);
    let mut cache = PropagatorCache::new();
    let dt_min = cfg.dt_min;
    let dt_max = pow2_floor(cfg.dt_max);
    let mut targets: Vec<T> = opts
        .record_times
        .iter()
        .copied()
        .filter(|&t| t > T::zero() && t <= cfg.t_end)
        .collect();
    targets.sort_by(|a, b| a.partial_cmp(b).expect("finite record times"));
    targets.dedup();
    let mut target_idx = 0;

    let mut snapshots = Vec::new();
    if cfg.snapshot_every > 0 {
        snapshots.push(state.snapshot());
    }
    let mut records = Vec::new();
    let mut tail: VecDeque<(T, ModalField<T>)> = VecDeque::new();
    tail.push_back((T::zero(), state.h()));

    let mut b_start: Option<Vec<T>> = None;
    let nonlin = |h: &[T]| -> Vec<T> {
        if opts.linear {
            vec![T::zero(); n]
        } else {
            nonlinearity_coeffs(&basis, h)
        }
    };
    let end_tol = cfg.t_end * T::epsilon() * T::lit(16.0);

    while state.status == Status::Running {
        if state.t >= cfg.t_end - end_tol {
            state.status = Status::Completed;
            break;
        }
        if state.accepted + state.rejected >= cfg.max_steps {
            state.status = Status::Stalled;
            state.message = Some(format!("step budget {} exhausted at t = {}", cfg.max_steps, state.t));
            break;
        }
        let next_target = targets.get(target_idx).copied().unwrap_or(cfg.t_end);
        let dt_nominal = state.dt.min(dt_max);
        let dt = dt_nominal.min(next_target - state.t);

        let h_start: Vec<T> = state.v.coeffs().iter().zip(&state.z).map(|(&a, &b)| a + b).collect();
        let b0 = match &b_start {
            Some(b) => b.clone(),
            None => nonlin(&h_start),
        };
        let (v_new, err) = if cfg.adaptive {
            let (d_full, p_full) = cache.get(&basis, dt).clone();
            let full = expo_update(state.v.coeffs(), &b0, &d_full, &p_full);
            let half = dt / T::lit(2.0);
            let (d_half, p_half) = cache.get(&basis, half).clone();
            let v_mid = expo_update(state.v.coeffs(), &b0, &d_half, &p_half);
            let z_mid = path.sample(state.t + half)?;
            let h_mid: Vec<T> = v_mid.iter().zip(&z_mid).map(|(&a, &b)| a + b).collect();
            let b_mid = nonlin(&h_mid);
            let v_two = expo_update(&v_mid, &b_mid, &d_half, &p_half);
            let diff: Vec<T> = full.iter().zip(&v_two).map(|(&a, &b)| a - b).collect();
            let zeros = basis.zeros();
            let err_norm = crate::modal::weighted_norm(zeros, &diff, cfg.error_beta);
            let scale = crate::modal::weighted_norm(zeros, &v_two, cfg.error_beta).max(T::one());
            (v_two, err_norm / (cfg.tol * scale))
        } else {
            let (d, p) = cache.get(&basis, dt).clone();
            (expo_update(state.v.coeffs(), &b0, &d, &p), T::zero())
        };

        let finite = v_new.iter().all(|c| c.is_finite()) && err.is_finite();
        let forced = cfg.adaptive && err > T::one() && dt_nominal <= dt_min;
        if cfg.adaptive && finite && err > T::one() && !forced {
            state.rejected += 1;
            let factor = step_factor(err, cfg);
            state.dt = pow2_floor((dt * factor).max(dt_min)).max(pow2_ceil(dt_min));
            b_start = Some(b0);
            continue;
        }
        if !finite {
            if cfg.adaptive && dt_nominal > dt_min {
                state.rejected += 1;
                state.dt = pow2_floor((dt * cfg.shrink_limit).max(dt_min)).max(pow2_ceil(dt_min));
                b_start = Some(b0);
                continue;
            }
            state.status = Status::Stalled;
            state.message = Some(format!("non-finite coefficients at t = {}", state.t));
            break;
        }

        // accept
        let t_new = if dt < dt_nominal { next_target } else { state.t + dt };
        state.t = t_new;
        state.v = ModalField::from_coeffs(&basis, v_new)?;
        state.z = path.sample(t_new)?;
        path.commit(t_new);
        state.accepted += 1;
        state.at_floor = forced;
        state.floor_run = if forced { state.floor_run + 1 } else { 0 };
        b_start = None;
        state.refresh(cfg);
        if !state.v.is_finite() || !state.norm_beta.is_finite() {
            state.status = Status::Stalled;
            state.message = Some(format!("non-finite state at t = {}", state.t));
        }

        if cfg.adaptive {
            let factor = if forced { T::one() } else { step_factor(err, cfg) };
            let mut proposal = pow2_floor((dt_nominal * factor).max(dt_min));
            // keep steps aligned: a step of length d starts at a multiple of d
            while proposal > dt_nominal && is_multiple(state.t, dt_nominal) && !is_multiple(state.t, proposal) {
                proposal /= T::lit(2.0);
            }
            state.dt = proposal.max(pow2_ceil(dt_min));
        }

        if state.status == Status::Running {
            state.status = detect_blowup(&state, cfg);
            if state.status == Status::BlownUp {
                state.tau = Some(state.t);
            }
        }
        if state.status == Status::Running && state.floor_run >= cfg.max_floor_steps {
            state.status = Status::Stalled;
            state.message = Some(format!(
                "{} consecutive steps at dt_min without blow-up at t = {}",
                state.floor_run, state.t
            ));
        }

        let h = state.h();
        tail.push_back((state.t, h.clone()));
        while tail.len() > cfg.growth_window + 1 {
            tail.pop_front();
        }
        if targets.get(target_idx).is_some_and(|&tt| state.t >= tt - end_tol) {
            records.push((state.t, h));
            target_idx += 1;
        }
        if cfg.snapshot_every > 0
            && (state.accepted.is_multiple_of(cfg.snapshot_every) || state.status != Status::Running)
        {
            snapshots.push(state.snapshot());
        }
    }
    if state.status == Status::Completed
        && cfg.snapshot_every > 0
        && snapshots.last().map(|s| s.status) != Some(Status::Completed)
    {
        snapshots.push(state.snapshot());
    }
    Ok(Trajectory {
        snapshots,
        records,
        tail: tail.into_iter().collect(),
        status: state.status,
        tau: state.tau,
        final_time: state.t,
        final_h: state.h(),
        accepted: state.accepted,
        rejected: state.rejected,
        message: state.message,
    })
}

fn step_factor<T: Real>(err: T, cfg: &SolverConfig<T>) -> T {
    // local error of a first-order scheme scales like Δ²
    let raw = if err > T::zero() {
        cfg.safety * err.powf(T::lit(-0.5))
    } else {
        cfg.grow_limit
    };
    raw.max(cfg.shrink_limit).min(cfg.grow_limit)
}

/// Step floor matched to a gradient threshold `G`: `pow2_floor(2/G²)`.
///
/// Along a self-similar approach the accepted step scales like `1/g²`, so
/// this floor is reached shortly before the gradient reaches `G`.
pub fn dt_floor_for_threshold<T: Real>(grad_threshold: T) -> T {
    pow2_floor(T::lit(2.0) / (grad_threshold * grad_threshold))
}

impl<T: Real> SolverConfig<T> {
    /// Sets the gradient threshold together with the matching step floor and,
    /// if needed, lowers `dt_init` below it.
    pub fn with_blowup_threshold(mut self, grad_threshold: T) -> Self {
        self.blowup_grad_threshold = grad_threshold;
        self.dt_min = dt_floor_for_threshold(grad_threshold);
        if !(self.dt_init > self.dt_min) {
            self.dt_init = self.dt_min + self.dt_min;
        }
        self
    }
}

/// Largest power of two not above `x`.
pub fn pow2_floor<T: Real>(x: T) -> T {
    T::lit(2f64.powi(x.to_f64_lossy().log2().floor() as i32))
}

fn pow2_ceil<T: Real>(x: T) -> T {
    T::lit(2f64.powi(x.to_f64_lossy().log2().ceil() as i32))
}

fn is_multiple<T: Real>(t: T, d: T) -> bool {
    let q = t / d;
    q == q.floor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::build_basis;
    use crate::noise::ZeroPath;

    fn cfg() -> SolverConfig<f64> {
        SolverConfig {
            t_end: 0.125,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        let bad = SolverConfig::<f64> {
            dt_min: 1.0,
            ..cfg()
        };
        assert!(matches!(bad.validate(), Err(ShmfError::Validation(_))));
    }

    #[test]
    fn linear_flow_is_exact() {
        let basis = build_basis::<f64>(8, 64).unwrap();
        let h0 = ModalField::from_coeffs(&basis, vec![1.0, 0.5, -0.25, 0.0, 0.1, 0.0, 0.0, 0.01]).unwrap();
        let mut path = ZeroPath::new(8);
        let opts = RunOptions {
            linear: true,
            ..RunOptions::default()
        };
        let tr = run(&h0, &cfg(), &mut path, &opts).unwrap();
        assert_eq!(tr.status, Status::Completed);
        let exact = h0.semigroup(0.125).unwrap();
        for (a, b) in tr.final_h.coeffs().iter().zip(exact.coeffs()) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1e-300) + 1e-300, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_stays_zero() {
        let basis = build_basis::<f64>(8, 64).unwrap();
        let h0 = ModalField::zeros(&basis);
        let mut path = ZeroPath::new(8);
        let tr = run(&h0, &cfg(), &mut path, &RunOptions::default()).unwrap();
        assert_eq!(tr.status, Status::Completed);
        assert!(tr.final_h.coeffs().iter().all(|&c| c == 0.0));
        assert!(tr.snapshots.iter().all(|s| s.grad0 == 0.0 && s.energy == 0.0));
    }

    #[test]
    fn record_times_are_hit() {
        let basis = build_basis::<f64>(8, 64).unwrap();
        let h0 = ModalField::unit(&basis, 0);
        let mut path = ZeroPath::new(8);
        let opts = RunOptions {
            record_times: vec![0.1, 0.03125],
            ..RunOptions::default()
        };
        let tr = run(&h0, &cfg(), &mut path, &opts).unwrap();
        let times: Vec<f64> = tr.records.iter().map(|r| r.0).collect();
        assert_eq!(times, vec![0.03125, 0.1]);
        assert_eq!(tr.final_time, 0.125);
    }

    #[test]
    fn powers_of_two() {
        assert_eq!(pow2_floor(1e-4), 2f64.powi(-14));
        assert_eq!(pow2_floor(0.25), 0.25);
        assert_eq!(pow2_ceil(1e-4), 2f64.powi(-13));
    }
}
