//! Trace-class noise `w_φ` with diagonal covariance `φ e_k = σ_k e_k` and the
//! Ornstein-Uhlenbeck process `Z(t) = ∫₀ᵗ S(t-s) dw_φ(s)`, simulated exactly
//! per mode.
//!
//! Every Gaussian draw is addressed by `(seed, path_index, event)`: the seed
//! keys a ChaCha8 generator, the path index selects its stream and the event
//! index its block position. Draws for modes `1..N` are a prefix of those for
//! `1..2N`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bessel::EigenBasis;
use crate::error::{Result, ShmfError};
use crate::modal::ModalField;
use crate::scalar::Real;

/// Gaussian draws per event are limited by the block window reserved for it.
pub const MAX_NOISE_MODES: usize = 8192;

const EVENT_SHIFT: u32 = 16;

/// `n` standard normals for one event of one path.
pub fn standard_normals(seed: u64, path_index: u64, event: u64, n: usize) -> Vec<f64> {
    assert!(n <= MAX_NOISE_MODES, "{n} draws exceed the per-event window");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng.set_word_pos(u128::from(event) << EVENT_SHIFT);
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    PowerLaw,
}

/// Per-mode amplitudes `σ_k`.
#[derive(Debug, Clone)]
pub struct NoiseSpectrum<T> {
    sigmas: Vec<T>,
    eigenvalues: Vec<T>,
    zeros: Vec<T>,
    beta_target: T,
    amplitude: T,
    exponent: T,
}

/// Power-law fit `σ_k x_k^β ≈ C k^{-(1/2+δ)}` over the upper half of the modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub c: f64,
    pub delta: f64,
}

/// `σ_k = amplitude · x_k^{-γ}`.
pub fn make_spectrum<T: Real>(
    kind: SpectrumKind,
    amplitude: T,
    exponent: T,
    basis: &EigenBasis<T>,
    beta_target: T,
) -> Result<NoiseSpectrum<T>> {
    let SpectrumKind::PowerLaw = kind;
    if !(amplitude > T::zero()) || !amplitude.is_finite() {
        return Err(ShmfError::Validation(format!(
            "noise amplitude {amplitude} must be positive: a degenerate covariance has a nontrivial kernel"
        )));
    }
    if !(exponent > beta_target + T::lit(0.5)) {
        return Err(ShmfError::Validation(format!(
            "exponent {exponent} must exceed beta_target + 1/2 = {}: otherwise Σ x_k^(2β) σ_k² diverges \
             and the noise is not Hilbert-Schmidt into V_β",
            beta_target + T::lit(0.5)
        )));
    }
    if basis.n_modes() > MAX_NOISE_MODES {
        return Err(ShmfError::Usage(format!(
            "noise supports at most {MAX_NOISE_MODES} modes"
        )));
    }
    let sigmas = basis
        .zeros()
        .iter()
        .map(|&x| amplitude * x.powf(-exponent))
        .collect();
    let spectrum = NoiseSpectrum {
        sigmas,
        eigenvalues: basis.eigenvalues().to_vec(),
        zeros: basis.zeros().to_vec(),
        beta_target,
        amplitude,
        exponent,
    };
    if let Some(fit) = spectrum.tail_fit() {
        if !(fit.delta > 0.0) {
            return Err(ShmfError::Validation(format!(
                "spectrum tail decays like k^-(1/2+{:.3}); trace-class check failed",
                fit.delta
            )));
        }
    }
    Ok(spectrum)
}

impl<T: Real> NoiseSpectrum<T> {
    /// `σ ≡ 0`. Outside the hypotheses of the noise model (degenerate), used for
    /// deterministic runs.
    pub fn off(basis: &EigenBasis<T>) -> Self {
        Self {
            sigmas: vec![T::zero(); basis.n_modes()],
            eigenvalues: basis.eigenvalues().to_vec(),
            zeros: basis.zeros().to_vec(),
            beta_target: T::zero(),
            amplitude: T::zero(),
            exponent: T::zero(),
        }
    }

    pub fn sigmas(&self) -> &[T] {
        &self.sigmas
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn n_modes(&self) -> usize {
        self.sigmas.len()
    }

    pub fn beta_target(&self) -> T {
        self.beta_target
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    pub fn exponent(&self) -> T {
        self.exponent
    }

    pub fn is_off(&self) -> bool {
        self.sigmas.iter().all(|&s| s == T::zero())
    }

    /// `(Σ x_k^{2β} σ_k²)^{1/2}` over the truncation.
    pub fn hilbert_schmidt_norm(&self, beta: T) -> T {
        crate::modal::weighted_norm(&self.zeros, &self.sigmas, beta)
    }

    /// Least-squares fit of `log(σ_k x_k^β)` against `log k` for `k > N/2`.
    /// `None` below eight modes or for a zero spectrum.
    pub fn tail_fit(&self) -> Option<TailFit> {
        let n = self.sigmas.len();
        if n < 8 || self.is_off() {
            return None;
        }
        let beta = self.beta_target.to_f64_lossy();
        let pts: Vec<(f64, f64)> = (n / 2..n)
            .map(|k| {
                let s = self.sigmas[k].to_f64_lossy() * self.zeros[k].to_f64_lossy().powf(beta);
                (((k + 1) as f64).ln(), s.ln())
            })
            .collect();
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
        let (mx, my) = (sx / m, sy / m);
        let (sxy, sxx) = pts
            .iter()
            .fold((0.0, 0.0), |(a, b), &(x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
        let slope = sxy / sxx;
        let delta = -slope - 0.5;
        // smallest C with σ_k x_k^β ≤ C k^{-(1/2+δ)} on the fitted range
        let c = pts
            .iter()
            .map(|&(x, y)| (y - slope * x).exp())
            .fold(0.0, f64::max);
        Some(TailFit { c, delta })
    }
}

/// Exact transition of the scalar OU process `dZ = -a Z dt + σ dB`:
/// returns `(e^{-aΔ}, std of Z(t+Δ) given Z(t))`.
pub fn ou_transition<T: Real>(a: T, sigma: T, dt: T) -> (T, T) {
    let decay = (-a * dt).exp();
    let q = -(T::lit(-2.0) * a * dt).exp_m1();
    (decay, sigma * (q / (a + a)).sqrt())
}

/// OU state for step-by-step simulation.
#[derive(Debug, Clone)]
pub struct OuState<T> {
    pub z_coeffs: Vec<T>,
    pub time: T,
    pub seed: u64,
    pub path_index: u64,
    pub steps: u64,
}

impl<T: Real> OuState<T> {
    /// `Z(0) = 0`.
    pub fn new(n_modes: usize, seed: u64, path_index: u64) -> Self {
        Self {
            z_coeffs: vec![T::zero(); n_modes],
            time: T::zero(),
            seed,
            path_index,
            steps: 0,
        }
    }
}

/// One exact OU transition of every mode.
pub fn ou_step<T: Real>(state: &OuState<T>, dt: T, spectrum: &NoiseSpectrum<T>) -> Result<OuState<T>> {
    if !(dt > T::zero()) {
        return Err(crate::error::domain("ou_step", format!("non-positive step {dt}")));
    }
    let xi = standard_normals(state.seed, state.path_index, state.steps, spectrum.n_modes());
    let z_coeffs = state
        .z_coeffs
        .iter()
        .zip(spectrum.eigenvalues.iter().zip(&spectrum.sigmas))
        .zip(&xi)
        .map(|((&z, (&a, &s)), &g)| {
            let (decay, sd) = ou_transition(a, s, dt);
            decay * z + sd * T::lit(g)
        })
        .collect();
    Ok(OuState {
        z_coeffs,
        time: state.time + dt,
        seed: state.seed,
        path_index: state.path_index,
        steps: state.steps + 1,
    })
}

/// `σ_k √dt ξ_k`, with `ξ` drawn for event `event` of the path.
pub fn wiener_increment<T: Real>(
    dt: T,
    spectrum: &NoiseSpectrum<T>,
    basis: &Arc<EigenBasis<T>>,
    seed: u64,
    path_index: u64,
    event: u64,
) -> Result<ModalField<T>> {
    if !(dt > T::zero()) {
        return Err(crate::error::domain("wiener_increment", format!("non-positive step {dt}")));
    }
    let xi = standard_normals(seed, path_index, event, spectrum.n_modes());
    let root = dt.sqrt();
    let coeffs = spectrum
        .sigmas
        .iter()
        .zip(&xi)
        .map(|(&s, &g)| s * root * T::lit(g))
        .collect();
    ModalField::from_coeffs(basis, coeffs)
}

/// A forcing path `z(t)` in modal coordinates, queried by the solver at
/// nondecreasing committed times.
pub trait NoisePath<T: Real> {
    /// Coefficients of `z(t)`. Times before the last committed time are not
    /// guaranteed to be available.
    fn sample(&mut self, t: T) -> Result<Vec<T>>;

    /// Declares that no time before `t` will be queried again.
    fn commit(&mut self, _t: T) {}

    fn is_zero(&self) -> bool {
        false
    }
}

/// `z ≡ 0`.
#[derive(Debug, Clone)]
pub struct ZeroPath {
    n_modes: usize,
}

impl ZeroPath {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes }
    }
}

impl<T: Real> NoisePath<T> for ZeroPath {
    fn sample(&mut self, _t: T) -> Result<Vec<T>> {
        Ok(vec![T::zero(); self.n_modes])
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Finest dyadic level of the bridge construction; level 0 has unit spacing.
pub const MAX_LEVEL: u32 = 40;

/// Largest time a dyadic path can reach.
pub const MAX_PATH_TIME: f64 = 64.0;

const LEVEL_BITS: u32 = 46;
const TICKS_PER_UNIT: u64 = 1 << MAX_LEVEL;

/// OU path built by a Lévy-type construction on dyadic times.
///
/// `Z` at integer times follows exact OU transitions; `Z` at an odd multiple of
/// `2^{-j}` is drawn from the OU bridge between its two neighbours at level
/// `j - 1`. Each value owns its own event index, so the realised path does not
/// depend on the order or set of query times. Non-dyadic times are bridged
/// inside their finest-level cell.
#[derive(Debug, Clone)]
pub struct OuPath<T> {
    spectrum: Arc<NoiseSpectrum<T>>,
    seed: u64,
    path_index: u64,
    dyadic: BTreeMap<u64, Vec<T>>,
    off_grid: BTreeMap<(u64, u64), Vec<T>>,
    committed: u64,
}

impl<T: Real> OuPath<T> {
    pub fn new(spectrum: Arc<NoiseSpectrum<T>>, seed: u64, path_index: u64) -> Self {
        let mut dyadic = BTreeMap::new();
        dyadic.insert(0, vec![T::zero(); spectrum.n_modes()]);
        Self {
            spectrum,
            seed,
            path_index,
            dyadic,
            off_grid: BTreeMap::new(),
            committed: 0,
        }
    }

    pub fn spectrum(&self) -> &Arc<NoiseSpectrum<T>> {
        &self.spectrum
    }

    /// Number of cached path values.
    pub fn cached_points(&self) -> usize {
        self.dyadic.len() + self.off_grid.len()
    }

    fn value_at_tick(&mut self, tick: u64) -> Vec<T> {
        if let Some(v) = self.dyadic.get(&tick) {
            return v.clone();
        }
        let value = if tick == 0 {
            vec![T::zero(); self.spectrum.n_modes()]
        } else if tick.is_multiple_of(TICKS_PER_UNIT) {
            let k = tick / TICKS_PER_UNIT;
            let prev = self.value_at_tick(tick - TICKS_PER_UNIT);
            self.forward(&prev, T::one(), event_id(0, k))
        } else {
            let tz = tick.trailing_zeros();
            let level = MAX_LEVEL - tz;
            let span = 1u64 << tz;
            let left = self.value_at_tick(tick - span);
            let right = self.value_at_tick(tick + span);
            let half = T::lit(span as f64 / TICKS_PER_UNIT as f64);
            self.bridge(&left, &right, half, half, event_id(level, tick >> tz))
        };
        self.dyadic.insert(tick, value.clone());
        value
    }

    fn forward(&self, z0: &[T], dt: T, event: u64) -> Vec<T> {
        let xi = standard_normals(self.seed, self.path_index, event, z0.len());
        z0.iter()
            .zip(self.spectrum.eigenvalues.iter().zip(&self.spectrum.sigmas))
            .zip(&xi)
            .map(|((&z, (&a, &s)), &g)| {
                let (decay, sd) = ou_transition(a, s, dt);
                decay * z + sd * T::lit(g)
            })
            .collect()
    }

    /// Draw of `Z(t0 + d1)` given `Z(t0) = z0` and `Z(t0 + d1 + d2) = z2`.
    fn bridge(&self, z0: &[T], z2: &[T], d1: T, d2: T, event: u64) -> Vec<T> {
        let xi = standard_normals(self.seed, self.path_index, event, z0.len());
        let two = T::lit(2.0);
        z0.iter()
            .zip(z2)
            .zip(self.spectrum.eigenvalues.iter().zip(&self.spectrum.sigmas))
            .zip(&xi)
            .map(|(((&a0, &a2), (&a, &s)), &g)| {
                let decay1 = (-a * d1).exp();
                let decay_tot = (-a * (d1 + d2)).exp();
                let q1 = -(-two * a * d1).exp_m1();
                let q2 = -(-two * a * d2).exp_m1();
                let q = -(-two * a * (d1 + d2)).exp_m1();
                if s == T::zero() || q == T::zero() {
                    return decay1 * a0;
                }
                let gain = (-a * d2).exp() * q1 / q;
                let mean = decay1 * a0 + gain * (a2 - decay_tot * a0);
                let sd = s * (q1 * q2 / (q * (a + a))).sqrt();
                mean + sd * T::lit(g)
            })
            .collect()
    }
}

fn event_id(level: u32, index: u64) -> u64 {
    (u64::from(level) << LEVEL_BITS) | index
}

impl<T: Real> NoisePath<T> for OuPath<T> {
    fn sample(&mut self, t: T) -> Result<Vec<T>> {
        let tf = t.to_f64_lossy();
        if !(0.0..=MAX_PATH_TIME).contains(&tf) {
            return Err(crate::error::domain(
                "noise path",
                format!("time {tf} outside [0, {MAX_PATH_TIME}]"),
            ));
        }
        let scaled = tf * TICKS_PER_UNIT as f64;
        let lo = scaled.floor() as u64;
        if scaled == lo as f64 {
            return Ok(self.value_at_tick(lo));
        }
        let key = (lo, tf.to_bits());
        if let Some(v) = self.off_grid.get(&key) {
            return Ok(v.clone());
        }
        let left = self.value_at_tick(lo);
        let right = self.value_at_tick(lo + 1);
        let tick = T::lit(1.0 / TICKS_PER_UNIT as f64);
        let d1 = T::lit((scaled - lo as f64) / TICKS_PER_UNIT as f64);
        let v = self.bridge(&left, &right, d1, tick - d1, event_id(MAX_LEVEL + 1, lo));
        self.off_grid.insert(key, v.clone());
        Ok(v)
    }

    fn commit(&mut self, t: T) {
        let tick = (t.to_f64_lossy() * TICKS_PER_UNIT as f64).floor() as u64;
        if tick <= self.committed {
            return;
        }
        self.committed = tick;
        // every neighbour needed by a later query lies within one unit behind it
        let keep_from = tick.saturating_sub(TICKS_PER_UNIT);
        self.dyadic = self.dyadic.split_off(&keep_from);
        self.off_grid = self.off_grid.split_off(&(keep_from, 0));
    }
}
