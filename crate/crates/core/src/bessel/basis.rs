use std::sync::Arc;

use super::{compute_zeros, j0, j0_j1, j1_prime, gauss_legendre_unit};
use crate::error::{Result, ShmfError};
use crate::scalar::Real;

/// Default quadrature order for `n_modes`: twice the mode count plus 32. With
/// exactly `2N` nodes the top modes miss the 1e-8 self-test for `N <= 32`.
pub fn default_quad_order(n_modes: usize) -> usize {
    2 * n_modes + 32
}

/// Orthonormal eigenbasis `e_k(r) = c_k J1(x_k r)` of `A = ∂rr + ∂r/r - 1/r²`
/// on `H = L²(r dr)`, tabulated on a Gauss-Legendre grid.
///
/// Immutable after construction. `eval` and `deriv` are stored row-major with
/// one row per quadrature node.
#[derive(Debug, Clone)]
pub struct EigenBasis<T> {
    n_modes: usize,
    zeros: Vec<T>,
    norm_consts: Vec<T>,
    eigenvalues: Vec<T>,
    origin_slopes: Vec<T>,
    quad_nodes: Vec<T>,
    quad_weights: Vec<T>,
    eval: Vec<T>,
    deriv: Vec<T>,
}

/// Builds the basis with `n_modes` modes and `n_quad` quadrature nodes.
///
/// Requires `n_quad >= 2 n_modes`. The normalisation constants come from the
/// quadrature and are cross-checked against `√2/|J0(x_k)|`; an under-resolved
/// rule is reported as [`ShmfError::Accuracy`].
pub fn build_basis<T: Real>(n_modes: usize, n_quad: usize) -> Result<Arc<EigenBasis<T>>> {
    if n_modes == 0 {
        return Err(ShmfError::Usage("basis needs at least one mode".into()));
    }
    if n_quad < 2 * n_modes {
        return Err(ShmfError::Usage(format!(
            "quadrature order {n_quad} below 2 x {n_modes} modes"
        )));
    }
    let zeros = compute_zeros::<T>(n_modes)?;
    EigenBasis::from_zeros(zeros, n_quad).map(Arc::new)
}

impl<T: Real> EigenBasis<T> {
    pub(crate) fn from_zeros(zeros: Vec<T>, n_quad: usize) -> Result<Self> {
        let n = zeros.len();
        let m = n_quad;
        let (quad_nodes, quad_weights) = gauss_legendre_unit::<T>(m);

        let mut raw = vec![T::zero(); m * n];
        let mut raw_deriv = vec![T::zero(); m * n];
        for (j, &r) in quad_nodes.iter().enumerate() {
            let row = &mut raw[j * n..(j + 1) * n];
            let drow = &mut raw_deriv[j * n..(j + 1) * n];
            for (k, &x) in zeros.iter().enumerate() {
                let y = x * r;
                let (_, j1v) = j0_j1(y);
                row[k] = j1v;
                drow[k] = x * j1_prime(y);
            }
        }

        let tol = self_test_tolerance::<T>();
        let mut norm_consts = Vec::with_capacity(n);
        for k in 0..n {
            let mut sq = T::zero();
            for j in 0..m {
                let v = raw[j * n + k];
                sq += quad_weights[j] * v * v;
            }
            let quad_c = T::one() / sq.sqrt();
            let closed_c = T::lit(2.0).sqrt() / j0(zeros[k]).abs();
            if ((quad_c - closed_c) / closed_c).abs() > tol {
                return Err(ShmfError::Accuracy(format!(
                    "mode {}: quadrature normalisation {quad_c} vs closed form {closed_c} \
                     ({m} nodes are too few)",
                    k + 1
                )));
            }
            norm_consts.push(quad_c);
        }
        for j in 0..m {
            for k in 0..n {
                raw[j * n + k] *= norm_consts[k];
                raw_deriv[j * n + k] *= norm_consts[k];
            }
        }
        let eigenvalues = zeros.iter().map(|&x| x * x).collect();
        let origin_slopes = zeros
            .iter()
            .zip(&norm_consts)
            .map(|(&x, &c)| c * x / T::lit(2.0))
            .collect();
        let basis = Self {
            n_modes: n,
            zeros,
            norm_consts,
            eigenvalues,
            origin_slopes,
            quad_nodes,
            quad_weights,
            eval: raw,
            deriv: raw_deriv,
        };
        let defect = basis.banded_orthonormality_defect(4);
        if defect > tol {
            return Err(ShmfError::Accuracy(format!(
                "orthonormality defect {defect} exceeds {tol} with {m} nodes"
            )));
        }
        Ok(basis)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_quad(&self) -> usize {
        self.quad_nodes.len()
    }

    /// Zeros `x_k` of `J1`, ascending.
    pub fn zeros(&self) -> &[T] {
        &self.zeros
    }

    /// `c_k = 1/|J1(x_k ·)|_H`.
    pub fn norm_consts(&self) -> &[T] {
        &self.norm_consts
    }

    /// `-λ_k = x_k²`.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// `e_k'(0) = c_k x_k / 2`.
    pub fn origin_slopes(&self) -> &[T] {
        &self.origin_slopes
    }

    pub fn quad_nodes(&self) -> &[T] {
        &self.quad_nodes
    }

    /// Weights for `∫₀¹ f(r) r dr`.
    pub fn quad_weights(&self) -> &[T] {
        &self.quad_weights
    }

    /// `E[j][k] = e_k(r_j)`, row-major `M × N`.
    pub fn eval_matrix(&self) -> &[T] {
        &self.eval
    }

    /// `D[j][k] = e_k'(r_j)`, row-major `M × N`.
    pub fn deriv_matrix(&self) -> &[T] {
        &self.deriv
    }

    #[inline]
    pub fn eval_at(&self, node: usize, mode: usize) -> T {
        self.eval[node * self.n_modes + mode]
    }

    #[inline]
    pub fn deriv_at(&self, node: usize, mode: usize) -> T {
        self.deriv[node * self.n_modes + mode]
    }

    /// Same shape means same tables: bases are pure functions of `(N, M)`.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_modes == other.n_modes && self.n_quad() == other.n_quad()
    }

    /// Evaluates `e_k(r)` at an arbitrary radius.
    pub fn mode_value(&self, mode: usize, r: T) -> T {
        self.norm_consts[mode] * super::j1(self.zeros[mode] * r)
    }

    /// Evaluates `e_k'(r)` at an arbitrary radius.
    pub fn mode_slope(&self, mode: usize, r: T) -> T {
        let x = self.zeros[mode];
        self.norm_consts[mode] * x * j1_prime(x * r)
    }

    /// Full Gram matrix `Σ_j w_j e_i(r_j) e_k(r_j)`, row-major `N × N`.
    pub fn gram_matrix(&self) -> Vec<T> {
        let n = self.n_modes;
        let mut g = vec![T::zero(); n * n];
        for (j, &w) in self.quad_weights.iter().enumerate() {
            let row = &self.eval[j * n..(j + 1) * n];
            for i in 0..n {
                let wi = w * row[i];
                for k in i..n {
                    g[i * n + k] += wi * row[k];
                }
            }
        }
        for i in 0..n {
            for k in 0..i {
                g[i * n + k] = g[k * n + i];
            }
        }
        g
    }

    /// Largest `|G_ik - δ_ik|` over `|i - k| <= band`.
    pub fn banded_orthonormality_defect(&self, band: usize) -> T {
        let n = self.n_modes;
        let mut worst = T::zero();
        for i in 0..n {
            for k in i..(i + band + 1).min(n) {
                let mut s = T::zero();
                for (j, &w) in self.quad_weights.iter().enumerate() {
                    s += w * self.eval[j * n + i] * self.eval[j * n + k];
                }
                let target = if i == k { T::one() } else { T::zero() };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }
}

fn self_test_tolerance<T: Real>() -> T {
    T::lit(1e-8).max(T::epsilon() * T::lit(1e4))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_thin_quadrature() {
        assert!(matches!(build_basis::<f64>(8, 15), Err(ShmfError::Usage(_))));
        assert!(matches!(build_basis::<f64>(0, 15), Err(ShmfError::Usage(_))));
    }

    #[test]
    fn too_few_nodes_is_an_accuracy_error() {
        // 2N nodes do not resolve N = 16 modes to 1e-8
        assert!(matches!(build_basis::<f64>(16, 32), Err(ShmfError::Accuracy(_))));
        assert!(build_basis::<f64>(16, default_quad_order(16)).is_ok());
    }

    #[test]
    fn first_normalisation_constant() {
        let b = build_basis::<f64>(1, 64).unwrap();
        // √2/|J0(x₁)| from a 30-digit evaluation
        assert!((b.norm_consts()[0] - 3.511_311_163_594_862_6).abs() < 1e-10);
    }

    #[test]
    fn columns_vanish_at_the_boundary() {
        let b = build_basis::<f64>(12, 64).unwrap();
        for k in 0..12 {
            assert!(b.mode_value(k, 1.0).abs() < 1e-10, "mode {k}");
            assert_eq!(b.mode_value(k, 0.0), 0.0);
        }
    }

    #[test]
    fn single_precision_basis_builds() {
        let b = build_basis::<f32>(8, 64).unwrap();
        assert!(b.banded_orthonormality_defect(8) < 1e-3);
    }
}
