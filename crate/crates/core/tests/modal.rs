use std::sync::Arc;

use shmf_core::bessel::{build_basis, EigenBasis};
use shmf_core::blowup::chi;
use shmf_core::modal::ModalField;
use shmf_core::noise::standard_normals;

/// Regression bounds for the seeded samples below, frozen from the first run.
const SOBOLEV_SUP: f64 = 0.0695;
const SOBOLEV_SUP_DERIV: f64 = 0.2846;
const NORM_EQUIV: f64 = 0.72;

fn random_field(b: &Arc<EigenBasis<f64>>, seed: u64, i: u64, decay: f64) -> ModalField<f64> {
    let g = standard_normals(seed, i, 0, b.n_modes());
    let c = g.iter().zip(b.zeros()).map(|(&g, &x)| g * x.powf(-decay)).collect();
    ModalField::from_coeffs(b, c).unwrap()
}

#[test]
fn smoothing_bound_has_sharp_constant() {
    let b = build_basis::<f64>(64, 160).unwrap();
    let beta = 2.5;
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    for alpha in [0.25, 0.5, 1.0] {
        for i in 0..100 {
            let h = random_field(&b, 11, i, 1.0);
            for j in 0..20 {
                let t = 1e-4 * 1e4f64.powf(j as f64 / 19.0);
                let lhs = h.semigroup(t).unwrap().apply_fractional(alpha).norm_beta(beta);
                let bound = (alpha / std::f64::consts::E).powf(alpha) * t.powf(-alpha) * h.norm_beta(beta);
                if lhs > bound * (1.0 + 1e-12) {
                    violations += 1;
                }
                tightest = tightest.max(lhs / bound);
            }
        }
    }
    assert_eq!(violations, 0);
    // the constant is attained up to sampling, so it cannot be lowered much
    assert!(tightest > 0.5, "{tightest}");
}

#[test]
fn sobolev_embedding_constants_are_stable() {
    let b = build_basis::<f64>(64, 160).unwrap();
    let beta = 2.5;
    let (mut c0, mut c1): (f64, f64) = (0.0, 0.0);
    for i in 0..100 {
        let f = random_field(&b, 7, i, beta + 1.0);
        let f = f.scale(1.0 / f.norm_beta(beta));
        c0 = c0.max(f.synthesize().iter().fold(0.0, |a, v| a.max(v.abs())));
        c1 = c1.max(f.grid_derivative().iter().fold(0.0, |a, v| a.max(v.abs())));
    }
    assert!((SOBOLEV_SUP * 0.99..=SOBOLEV_SUP * 1.01).contains(&c0), "{c0}");
    assert!((SOBOLEV_SUP_DERIV * 0.99..=SOBOLEV_SUP_DERIV * 1.01).contains(&c1), "{c1}");
}

#[test]
fn second_order_norm_equivalence() {
    let b = build_basis::<f64>(64, 160).unwrap();
    for i in 0..100 {
        let g = standard_normals(8, i, 0, 32);
        let mut c = vec![0.0; 64];
        for k in 0..32 {
            c[k] = g[k] / (k as f64 + 1.0).powi(3);
        }
        let f = ModalField::from_coeffs(&b, c).unwrap();
        let (h, d) = (f.synthesize(), f.grid_derivative());
        let ah = f.apply_fractional(1.0).synthesize();
        let mut s = 0.0;
        for (j, (&r, &w)) in b.quad_nodes().iter().zip(b.quad_weights()).enumerate() {
            let q = d[j] / r - h[j] / (r * r);
            // h'' = A h - h'/r + h/r² and A h = -(-A) h
            let h2 = -ah[j] - q;
            s += w * (h2 * h2 + q * q);
        }
        let ratio = s / f.norm_beta(2.0).powi(2);
        assert!((NORM_EQUIV / 2.0..=2.0 * NORM_EQUIV).contains(&ratio), "{ratio}");
    }
}

#[test]
fn parabola_round_trip_and_gradient() {
    let b = build_basis::<f64>(64, 160).unwrap();
    let grid: Vec<f64> = b.quad_nodes().iter().map(|&r| chi(1.0, r)).collect();
    let f = ModalField::analyze(&grid, &b).unwrap();
    let back = f.synthesize();
    let err = grid.iter().zip(&back).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(err <= 1e-6, "{err}");
    assert!((f.gradient_at_origin() - 2.0).abs() < 1e-3);
    // convergence towards 2 with N
    let coarse = ModalField::project(&build_basis::<f64>(16, 64).unwrap(), |r| chi(1.0, r));
    assert!((f.gradient_at_origin() - 2.0).abs() < (coarse.gradient_at_origin() - 2.0).abs());
}

#[test]
fn round_trips_and_algebra() {
    let b = build_basis::<f64>(64, 160).unwrap();
    let zero = ModalField::analyze(&vec![0.0; b.n_quad()], &b).unwrap();
    assert!(zero.coeffs().iter().all(|&c| c == 0.0));
    let e3 = ModalField::unit(&b, 2);
    let a = ModalField::analyze(&e3.synthesize(), &b).unwrap();
    for (k, &c) in a.coeffs().iter().enumerate() {
        assert!((c - if k == 2 { 1.0 } else { 0.0 }).abs() < 1e-8);
    }
    for i in 0..20 {
        let f = random_field(&b, 3, i, 4.0);
        let f = f.scale(1.0 / f.norm_beta(4.0));
        let g = ModalField::analyze(&f.synthesize(), &b).unwrap();
        let err = f.coeffs().iter().zip(g.coeffs()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err <= 1e-10);
        let grid_err = f.synthesize().iter().zip(g.synthesize()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(grid_err <= 1e-8);
        let f2 = f.semigroup(0.01).unwrap().semigroup(0.02).unwrap();
        let f3 = f.semigroup(0.03).unwrap();
        for (x, y) in f2.coeffs().iter().zip(f3.coeffs()) {
            assert!((x - y).abs() <= 1e-13 * y.abs());
        }
        let p = f.apply_fractional(0.3).apply_fractional(0.45);
        let q = f.apply_fractional(0.75);
        for (x, y) in p.coeffs().iter().zip(q.coeffs()) {
            assert!((x - y).abs() <= 1e-13 * y.abs());
        }
        let s = f.scale(-2.5);
        assert!((s.norm_beta(1.5) - 2.5 * f.norm_beta(1.5)).abs() < 1e-12 * f.norm_beta(1.5));
    }
    assert!(ModalField::unit(&b, 0).semigroup(-1e-3).is_err());
    let x1 = b.zeros()[0];
    let e1 = ModalField::unit(&b, 0);
    assert!((e1.semigroup(1.0).unwrap().coeffs()[0] - (-x1 * x1).exp()).abs() < 1e-20);
    assert!((e1.semigroup(1.0).unwrap().coeffs()[0] - 4.2e-7).abs() < 1e-8);
    let ek = ModalField::unit(&b, 9);
    assert!((ek.gradient_at_origin() - b.norm_consts()[9] * b.zeros()[9] / 2.0).abs() < 1e-12);
}

#[test]
fn single_precision_field() {
    let b = build_basis::<f32>(16, 64).unwrap();
    let f = ModalField::project(&b, |r| chi(1.0f32, r));
    assert!((f.gradient_at_origin() - 2.0).abs() < 0.05);
}
