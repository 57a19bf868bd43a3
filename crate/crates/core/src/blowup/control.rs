//! Steering paths: a forcing `z₁` with `z₁(0) = 0` under which the solution
//! started at `h₀` follows `φ(t) = ((T₁-t)h₀ + t h₁)/T₁` and reaches `h₁` at `T₁`.
//!
//! Per mode, `z₁ = ∫₀ᵗ S(t-s) f'(s) ds` with `f' = φ' - Aφ - b(·, φ)`; the
//! linear part integrates exactly to `φ(t) - S(t)h₀`, the rest is
//! `-∫₀ᵗ S(t-s) b(·, φ(s)) ds`, evaluated from a Chebyshev table in `s`.

use std::sync::Arc;

use crate::bessel::EigenBasis;
use crate::error::{domain, Result};
use crate::modal::ModalField;
use crate::noise::NoisePath;
use crate::scalar::Real;
use crate::solver::nonlinearity_coeffs;
use crate::timequad::{ChebGrid, ExpConvolution};

/// Chebyshev intervals of the `b(·, φ(s))` table.
pub const CONTROL_CHEB_NODES: usize = 32;
/// Gauss-Legendre order per convolution panel.
pub const CONTROL_QUAD_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, Default)]
pub struct ControlOptions {
    /// Build the path for `b ≡ 0`.
    pub linear: bool,
}

/// A steering path queried as a [`NoisePath`].
#[derive(Debug, Clone)]
pub struct ControlPath<T: Real> {
    basis: Arc<EigenBasis<T>>,
    h0: Vec<T>,
    h1: Vec<T>,
    t1: T,
    grid: ChebGrid<T>,
    /// `table[i][k]`: mode `k` of `b(·, φ(s_i))`.
    table: Vec<Vec<T>>,
    conv: ExpConvolution<T>,
}

/// Builds the steering path from `h₀` to `h₁` in time `t1`.
pub fn build_control<T: Real>(
    h0: &ModalField<T>,
    h1: &ModalField<T>,
    t1: T,
    opts: ControlOptions,
) -> Result<ControlPath<T>> {
    h0.check_compatible(h1)?;
    if !(t1 > T::zero() && t1.is_finite()) {
        return Err(domain("build_control", format!("T1 = {t1} must be positive")));
    }
    let basis = Arc::clone(h0.basis());
    let n = basis.n_modes();
    let grid = ChebGrid::new(T::zero(), t1, CONTROL_CHEB_NODES);
    let table = grid
        .nodes()
        .iter()
        .map(|&s| {
            if opts.linear {
                return vec![T::zero(); n];
            }
            let w = s / t1;
            let phi: Vec<T> = h0
                .coeffs()
                .iter()
                .zip(h1.coeffs())
                .map(|(&a, &b)| (T::one() - w) * a + w * b)
                .collect();
            nonlinearity_coeffs(&basis, &phi)
        })
        .collect();
    Ok(ControlPath {
        basis,
        h0: h0.coeffs().to_vec(),
        h1: h1.coeffs().to_vec(),
        t1,
        grid,
        table,
        conv: ExpConvolution::new(CONTROL_QUAD_ORDER),
    })
}

impl<T: Real> ControlPath<T> {
    pub fn t1(&self) -> T {
        self.t1
    }

    pub fn basis(&self) -> &Arc<EigenBasis<T>> {
        &self.basis
    }

    /// Coefficients of `z₁(t)` for `t ∈ [0, T₁]`.
    pub fn value(&self, t: T) -> Result<Vec<T>> {
        if !(t >= T::zero() && t <= self.t1) {
            return Err(domain("control path", format!("t = {t} outside [0, T1 = {}]", self.t1)));
        }
        let w = t / self.t1;
        let eigs = self.basis.eigenvalues();
        let mut out = Vec::with_capacity(eigs.len());
        for (k, &a) in eigs.iter().enumerate() {
            let phi = (T::one() - w) * self.h0[k] + w * self.h1[k];
            let linear = phi - (-a * t).exp() * self.h0[k];
            let mut conv = T::zero();
            for (s, weight) in self.conv.rule(a, t) {
                let row = self.grid.lagrange_row(s);
                let bk = row
                    .iter()
                    .zip(&self.table)
                    .fold(T::zero(), |acc, (&l, col)| acc + l * col[k]);
                conv += weight * bk;
            }
            out.push(linear - conv);
        }
        Ok(out)
    }

    /// `z₁` at each time.
    pub fn sample_times(&self, times: &[T]) -> Result<Vec<ModalField<T>>> {
        times
            .iter()
            .map(|&t| ModalField::from_coeffs(&self.basis, self.value(t)?))
            .collect()
    }
}

impl<T: Real> NoisePath<T> for ControlPath<T> {
    fn sample(&mut self, t: T) -> Result<Vec<T>> {
        self.value(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::build_basis;

    #[test]
    fn linear_closed_form_and_origin() {
        let basis = build_basis::<f64>(12, 56).unwrap();
        let h0 = ModalField::from_coeffs(&basis, (1..=12).map(|k| 1.0 / (k * k) as f64).collect()).unwrap();
        let path = build_control(&h0, &h0, 0.5, ControlOptions { linear: true }).unwrap();
        assert!(path.value(0.0).unwrap().iter().all(|&v| v == 0.0));
        let t = 0.3;
        let z = path.value(t).unwrap();
        for (k, &a) in basis.eigenvalues().iter().enumerate() {
            let want = -(-a * t).exp_m1() * h0.coeffs()[k];
            assert!((z[k] - want).abs() < 1e-14);
        }
        assert!(path.value(0.51).is_err());
    }
}
