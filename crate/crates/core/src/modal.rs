//! Fields in the truncated eigenbasis: transforms between the quadrature grid
//! and coefficients, `V_β` norms, fractional powers of `-A` and the heat
//! semigroup `S(t) = e^{tA}`.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::bessel::EigenBasis;
use crate::error::{domain, Result, ShmfError};
use crate::scalar::Real;

/// `h = Σ_k h_k e_k` on a fixed basis. Dirichlet conditions at `r = 0` and
/// `r = 1` hold for every coefficient vector.
#[derive(Debug, Clone)]
pub struct ModalField<T> {
    coeffs: Vec<T>,
    basis: Arc<EigenBasis<T>>,
}

impl<T: Real> PartialEq for ModalField<T> {
    fn eq(&self, other: &Self) -> bool {
        self.basis.same_shape(&other.basis) && self.coeffs == other.coeffs
    }
}

impl<T: Real> ModalField<T> {
    pub fn zeros(basis: &Arc<EigenBasis<T>>) -> Self {
        Self {
            coeffs: vec![T::zero(); basis.n_modes()],
            basis: Arc::clone(basis),
        }
    }

    /// The basis vector `e_{k+1}` (`k` is 0-based).
    pub fn unit(basis: &Arc<EigenBasis<T>>, k: usize) -> Self {
        let mut f = Self::zeros(basis);
        f.coeffs[k] = T::one();
        f
    }

    pub fn from_coeffs(basis: &Arc<EigenBasis<T>>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != basis.n_modes() {
            return Err(ShmfError::Usage(format!(
                "{} coefficients for a {}-mode basis",
                coeffs.len(),
                basis.n_modes()
            )));
        }
        Ok(Self {
            coeffs,
            basis: Arc::clone(basis),
        })
    }

    /// Discrete Fourier-Bessel analysis `h_k = Σ_j w_j f(r_j) e_k(r_j)`.
    pub fn analyze(grid_values: &[T], basis: &Arc<EigenBasis<T>>) -> Result<Self> {
        if grid_values.len() != basis.n_quad() {
            return Err(ShmfError::Usage(format!(
                "{} grid values for a {}-node quadrature",
                grid_values.len(),
                basis.n_quad()
            )));
        }
        Ok(Self {
            coeffs: analyze_into(basis, grid_values),
            basis: Arc::clone(basis),
        })
    }

    /// Samples `x ↦ f(x)` at the quadrature nodes and analyses the result.
    pub fn project(basis: &Arc<EigenBasis<T>>, f: impl Fn(T) -> T) -> Self {
        let grid: Vec<T> = basis.quad_nodes().iter().map(|&r| f(r)).collect();
        Self {
            coeffs: analyze_into(basis, &grid),
            basis: Arc::clone(basis),
        }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn basis(&self) -> &Arc<EigenBasis<T>> {
        &self.basis
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    /// Values on the quadrature nodes.
    pub fn synthesize(&self) -> Vec<T> {
        synthesize_with(self.basis.eval_matrix(), self.basis.n_modes(), &self.coeffs)
    }

    /// `∂r h` on the quadrature nodes, from the analytic per-mode derivatives.
    pub fn grid_derivative(&self) -> Vec<T> {
        synthesize_with(self.basis.deriv_matrix(), self.basis.n_modes(), &self.coeffs)
    }

    /// `h(r)` at an arbitrary radius.
    pub fn value_at(&self, r: T) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c * self.basis.mode_value(k, r))
            .fold(T::zero(), |a, b| a + b)
    }

    /// `∂r h(r)` at an arbitrary radius.
    pub fn slope_at(&self, r: T) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c * self.basis.mode_slope(k, r))
            .fold(T::zero(), |a, b| a + b)
    }

    /// `|h|_β = (Σ x_k^{2β} h_k²)^{1/2}`.
    pub fn norm_beta(&self, beta: T) -> T {
        weighted_norm(self.basis.zeros(), &self.coeffs, beta)
    }

    /// `|h|_H`.
    pub fn norm_h(&self) -> T {
        self.coeffs
            .iter()
            .map(|&c| c * c)
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// `(-A)^α h`: coefficient `k` scaled by `x_k^{2α}`.
    pub fn apply_fractional(&self, alpha: T) -> Self {
        let two_alpha = alpha + alpha;
        let coeffs = self
            .coeffs
            .iter()
            .zip(self.basis.zeros())
            .map(|(&c, &x)| c * x.powf(two_alpha))
            .collect();
        Self {
            coeffs,
            basis: Arc::clone(&self.basis),
        }
    }

    /// `S(t) h`: coefficient `k` scaled by `exp(-x_k² t)`.
    pub fn semigroup(&self, t: T) -> Result<Self> {
        if !(t >= T::zero()) {
            return Err(domain("semigroup", format!("negative time {t}")));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(&c, &lam)| c * (-lam * t).exp())
            .collect();
        Ok(Self {
            coeffs,
            basis: Arc::clone(&self.basis),
        })
    }

    /// `∂r h(0) = Σ h_k c_k x_k / 2`.
    pub fn gradient_at_origin(&self) -> T {
        self.coeffs
            .iter()
            .zip(self.basis.origin_slopes())
            .map(|(&c, &s)| c * s)
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
            basis: Arc::clone(&self.basis),
        }
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&u, &v)| a * u + b * v)
                .collect(),
            basis: Arc::clone(&self.basis),
        })
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.basis.same_shape(&other.basis) {
            Ok(())
        } else {
            Err(ShmfError::Usage(format!(
                "basis mismatch: ({}, {}) vs ({}, {})",
                self.basis.n_modes(),
                self.basis.n_quad(),
                other.basis.n_modes(),
                other.basis.n_quad()
            )))
        }
    }

    /// Copies the first modes onto another basis, padding with zeros.
    pub fn transfer(&self, basis: &Arc<EigenBasis<T>>) -> Self {
        let mut coeffs = vec![T::zero(); basis.n_modes()];
        for (dst, &src) in coeffs.iter_mut().zip(&self.coeffs) {
            *dst = src;
        }
        Self {
            coeffs,
            basis: Arc::clone(basis),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// `‖h‖_{T,β}`: the largest `|h(t_i)|_β` over stored snapshots.
pub fn trajectory_norm<'a, T: Real>(snapshots: impl IntoIterator<Item = &'a ModalField<T>>, beta: T) -> T {
    snapshots
        .into_iter()
        .map(|f| f.norm_beta(beta))
        .fold(T::zero(), |a, b| a.max(b))
}

pub(crate) fn weighted_norm<T: Real>(zeros: &[T], coeffs: &[T], beta: T) -> T {
    let two_beta = beta + beta;
    coeffs
        .iter()
        .zip(zeros)
        .map(|(&c, &x)| x.powf(two_beta) * c * c)
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

pub(crate) fn analyze_into<T: Real>(basis: &EigenBasis<T>, grid: &[T]) -> Vec<T> {
    let n = basis.n_modes();
    let e = basis.eval_matrix();
    let mut out = vec![T::zero(); n];
    for (j, (&w, &f)) in basis.quad_weights().iter().zip(grid).enumerate() {
        let wf = w * f;
        if wf == T::zero() {
            continue;
        }
        for (o, &ejk) in out.iter_mut().zip(&e[j * n..(j + 1) * n]) {
            *o += wf * ejk;
        }
    }
    out
}

pub(crate) fn synthesize_with<T: Real>(matrix: &[T], n: usize, coeffs: &[T]) -> Vec<T> {
    matrix
        .chunks_exact(n)
        .map(|row| {
            row.iter()
                .zip(coeffs)
                .fold(T::zero(), |acc, (&e, &c)| acc + e * c)
        })
        .collect()
}

impl<T: Real> Add for &ModalField<T> {
    type Output = ModalField<T>;
    fn add(self, rhs: Self) -> ModalField<T> {
        self.lincomb(T::one(), rhs, T::one())
            .expect("adding fields on different bases")
    }
}

impl<T: Real> Sub for &ModalField<T> {
    type Output = ModalField<T>;
    fn sub(self, rhs: Self) -> ModalField<T> {
        self.lincomb(T::one(), rhs, -T::one())
            .expect("subtracting fields on different bases")
    }
}

impl<T: Real> Mul<T> for &ModalField<T> {
    type Output = ModalField<T>;
    fn mul(self, rhs: T) -> ModalField<T> {
        self.scale(rhs)
    }
}

impl<T: Real> Neg for &ModalField<T> {
    type Output = ModalField<T>;
    fn neg(self) -> ModalField<T> {
        self.scale(-T::one())
    }
}
