use crate::scalar::Real;

/// Gauss-Legendre nodes and weights on `(-1, 1)`, nodes ascending.
pub fn gauss_legendre<T: Real>(m: usize) -> (Vec<T>, Vec<T>) {
    assert!(m >= 1, "quadrature order must be positive");
    let mut nodes = vec![T::zero(); m];
    let mut weights = vec![T::zero(); m];
    let mf = T::from_usize_lossy(m);
    let half = m.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess for the i-th largest root
        let theta = T::PI() * (T::from_usize_lossy(i) + T::lit(0.75)) / (mf + T::lit(0.5));
        let mut x = theta.cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= T::epsilon() * T::lit(2.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != T::zero() {
            dp = d;
        }
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        nodes[m - 1 - i] = x;
        nodes[i] = -x;
        weights[m - 1 - i] = w;
        weights[i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = T::zero();
    }
    (nodes, weights)
}

fn legendre_with_derivative<T: Real>(m: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for n in 2..=m {
        let nf = T::from_usize_lossy(n);
        let p2 = ((T::lit(2.0) * nf - T::one()) * x * p1 - (nf - T::one()) * p0) / nf;
        p0 = p1;
        p1 = p2;
    }
    let mf = T::from_usize_lossy(m);
    let d = mf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Gauss-Legendre rule mapped to `(0, 1)` with the radial weight `r` folded in,
/// so that `Σ w_j f(r_j) ≈ ∫₀¹ f(r) r dr`.
pub fn gauss_legendre_unit<T: Real>(m: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(m);
    let half = T::lit(0.5);
    let nodes: Vec<T> = x.iter().map(|&xi| half * (xi + T::one())).collect();
    let weights = w
        .iter()
        .zip(&nodes)
        .map(|(&wi, &ri)| half * wi * ri)
        .collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for m in [1usize, 2, 5, 16, 64, 257] {
            let (x, w) = gauss_legendre::<f64>(m);
            for deg in 0..(2 * m).min(40) {
                let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "m={m} deg={deg}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn unit_rule_absorbs_radial_weight() {
        let (r, w) = gauss_legendre_unit::<f64>(32);
        assert!(r.iter().all(|&ri| ri > 0.0 && ri < 1.0));
        // ∫₀¹ r³ · r dr = 1/5
        let got: f64 = r.iter().zip(&w).map(|(ri, wi)| wi * ri.powi(3)).sum();
        assert!((got - 0.2).abs() < 1e-15);
        assert!(r.windows(2).all(|p| p[0] < p[1]));
    }
}
