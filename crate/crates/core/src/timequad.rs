//! Quadrature in time: Chebyshev interpolation on a slab and exponentially
//! weighted convolutions `∫₀ᵗ e^{-a(t-s)} p(s) ds`.

use crate::bessel::gauss_legendre;
use crate::scalar::Real;

/// Chebyshev-Lobatto nodes on `[a, b]` with barycentric weights.
#[derive(Debug, Clone)]
pub struct ChebGrid<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> ChebGrid<T> {
    /// `n + 1` nodes, ascending.
    pub fn new(a: T, b: T, n: usize) -> Self {
        assert!(n >= 1, "need at least two nodes");
        let mid = (a + b) / T::lit(2.0);
        let half = (b - a) / T::lit(2.0);
        let nf = T::from_usize_lossy(n);
        let nodes = (0..=n)
            .map(|i| {
                if i == 0 {
                    a
                } else if i == n {
                    b
                } else {
                    mid - half * (T::PI() * T::from_usize_lossy(i) / nf).cos()
                }
            })
            .collect();
        let weights = (0..=n)
            .map(|i| {
                let w = if i % 2 == 0 { T::one() } else { -T::one() };
                if i == 0 || i == n {
                    w / T::lit(2.0)
                } else {
                    w
                }
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Coefficients `ℓ_i(s)` with `p(s) = Σ ℓ_i(s) p_i`.
    pub fn lagrange_row(&self, s: T) -> Vec<T> {
        if let Some(i) = self.nodes.iter().position(|&x| x == s) {
            let mut row = vec![T::zero(); self.nodes.len()];
            row[i] = T::one();
            return row;
        }
        let terms: Vec<T> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w / (s - x))
            .collect();
        let total = terms.iter().fold(T::zero(), |a, &b| a + b);
        terms.into_iter().map(|v| v / total).collect()
    }

    pub fn interpolate(&self, values: &[T], s: T) -> T {
        self.lagrange_row(s)
            .iter()
            .zip(values)
            .fold(T::zero(), |acc, (&l, &v)| acc + l * v)
    }
}

/// Gauss-Legendre panels for `∫₀ᵗ e^{-a(t-s)} f(s) ds`, graded geometrically
/// away from `s = t` in units of the decay length `1/a`.
#[derive(Debug, Clone)]
pub struct ExpConvolution<T> {
    ref_nodes: Vec<T>,
    ref_weights: Vec<T>,
}

impl<T: Real> ExpConvolution<T> {
    pub fn new(order: usize) -> Self {
        let (ref_nodes, ref_weights) = gauss_legendre::<T>(order);
        Self {
            ref_nodes,
            ref_weights,
        }
    }

    /// Nodes `s` and weights already including `e^{-a(t-s)}`.
    pub fn rule(&self, a: T, t: T) -> Vec<(T, T)> {
        let mut out = Vec::new();
        if !(t > T::zero()) {
            return out;
        }
        // panels [t - 2w, t - w] with w = 1/a, 2/a, 4/a, ... after a first one [t - 1/a, t]
        let cutoff = T::lit(40.0);
        let mut hi = T::zero();
        let mut width = if a > T::zero() { T::one() / a } else { t };
        loop {
            let lo_dist = (hi + width).min(t);
            let mid = (lo_dist + hi) / T::lit(2.0);
            let half = (lo_dist - hi) / T::lit(2.0);
            for (&x, &w) in self.ref_nodes.iter().zip(&self.ref_weights) {
                let dist = mid + half * x;
                out.push((t - dist, w * half * (-a * dist).exp()));
            }
            if lo_dist >= t || a * lo_dist > cutoff {
                break;
            }
            hi = lo_dist;
            width = width + width;
        }
        out
    }

    pub fn integrate(&self, a: T, t: T, mut f: impl FnMut(T) -> T) -> T {
        self.rule(a, t)
            .into_iter()
            .fold(T::zero(), |acc, (s, w)| acc + w * f(s))
    }
}
