//! The nonlinearity `b(r, h) = (2h - sin 2h)/(2r²)` and the corotational
//! energy.

use std::sync::Arc;

use crate::bessel::EigenBasis;
use crate::error::{Result, ShmfError};
use crate::modal::{analyze_into, ModalField};
use crate::scalar::Real;

/// Below this `|h|` the kernel is summed as a power series. The direct formula
/// loses about `log10(1.5/h²)` digits to cancellation, so at `|h| = 0.5` both
/// branches carry full precision.
pub const SERIES_CROSSOVER: f64 = 0.5;

/// `2h - sin 2h`, cancellation-safe.
pub fn two_h_minus_sin<T: Real>(h: T) -> T {
    if h.abs() < T::lit(SERIES_CROSSOVER) {
        kernel_series(h)
    } else {
        kernel_direct(h)
    }
}

/// `2h - sin 2h` evaluated literally.
pub fn kernel_direct<T: Real>(h: T) -> T {
    let u = h + h;
    u - u.sin()
}

/// `u - sin u = (u³/6)(1 - u²/20 + u⁴/840 - …)` with `u = 2h`, summed until
/// the terms drop below machine precision.
pub fn kernel_series<T: Real>(h: T) -> T {
    let u = h + h;
    let u2 = u * u;
    let mut term = T::one();
    let mut sum = T::one();
    // term_n / term_{n-1} = -u² / ((2n+2)(2n+3))
    for n in 1..40 {
        let nf = T::from_usize_lossy(n);
        let two = T::lit(2.0);
        term = -term * u2 / ((two * nf + two) * (two * nf + T::lit(3.0)));
        sum += term;
        if term.abs() <= T::epsilon() * sum.abs() * T::lit(0.25) {
            break;
        }
    }
    u * u2 / T::lit(6.0) * sum
}

/// `b(r, h)`.
#[inline]
pub fn b_pointwise<T: Real>(r: T, h: T) -> T {
    two_h_minus_sin(h) / (T::lit(2.0) * r * r)
}

/// `b` evaluated on the quadrature nodes.
#[derive(Debug, Clone)]
pub struct NonlinearityEval<T> {
    grid_values: Vec<T>,
    basis: Arc<EigenBasis<T>>,
}

impl<T: Real> NonlinearityEval<T> {
    pub fn grid_values(&self) -> &[T] {
        &self.grid_values
    }

    pub fn basis(&self) -> &Arc<EigenBasis<T>> {
        &self.basis
    }

    /// Projection onto the first `N` modes.
    pub fn analyze(&self) -> ModalField<T> {
        ModalField::from_coeffs(&self.basis, analyze_into(&self.basis, &self.grid_values))
            .expect("projection has one coefficient per mode")
    }

    /// `|b|_H` by quadrature.
    pub fn norm_h(&self) -> T {
        self.grid_values
            .iter()
            .zip(self.basis.quad_weights())
            .map(|(&v, &w)| w * v * v)
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.grid_values.iter().all(|v| v.is_finite())
    }
}

pub fn eval_b<T: Real>(field: &ModalField<T>) -> NonlinearityEval<T> {
    eval_on_grid(field.basis(), &field.synthesize())
}

/// `b(·, v + z)` with `v` modal and `z` given on the grid.
pub fn eval_b_shifted<T: Real>(field: &ModalField<T>, shift_grid: &[T]) -> Result<NonlinearityEval<T>> {
    let basis = field.basis();
    if shift_grid.len() != basis.n_quad() {
        return Err(ShmfError::Usage(format!(
            "shift has {} values, grid has {}",
            shift_grid.len(),
            basis.n_quad()
        )));
    }
    let mut grid = field.synthesize();
    for (g, &z) in grid.iter_mut().zip(shift_grid) {
        *g += z;
    }
    Ok(eval_on_grid(basis, &grid))
}

/// `b(·, h)` for grid values `h`.
pub fn eval_on_grid<T: Real>(basis: &Arc<EigenBasis<T>>, h: &[T]) -> NonlinearityEval<T> {
    let grid_values = basis
        .quad_nodes()
        .iter()
        .zip(h)
        .map(|(&r, &v)| b_pointwise(r, v))
        .collect();
    NonlinearityEval {
        grid_values,
        basis: Arc::clone(basis),
    }
}

/// `E(h) = π ∫ [(∂r h)² + sin²h / r²] r dr` by quadrature.
pub fn corotational_energy<T: Real>(field: &ModalField<T>) -> T {
    let basis = field.basis();
    let h = field.synthesize();
    let dh = field.grid_derivative();
    let mut e = T::zero();
    for (((&w, &r), &v), &d) in basis.quad_weights().iter().zip(basis.quad_nodes()).zip(&h).zip(&dh) {
        // sin h / r has no cancellation; form the ratio before squaring
        let s = v.sin() / r;
        e += w * (d * d + s * s);
    }
    T::PI() * e
}

/// `π ∫ [(∂r h)² + h²/r²] r dr`, the small-angle limit of the energy.
pub fn dirichlet_energy<T: Real>(field: &ModalField<T>) -> T {
    let basis = field.basis();
    let h = field.synthesize();
    let dh = field.grid_derivative();
    let mut e = T::zero();
    for (((&w, &r), &v), &d) in basis.quad_weights().iter().zip(basis.quad_nodes()).zip(&h).zip(&dh) {
        let s = v / r;
        e += w * (d * d + s * s);
    }
    T::PI() * e
}
