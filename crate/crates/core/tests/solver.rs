use std::sync::Arc;

use shmf_core::bessel::build_basis;
use shmf_core::blowup::chi_field;
use shmf_core::modal::ModalField;
use shmf_core::noise::{make_spectrum, standard_normals, NoisePath, OuPath, SpectrumKind, ZeroPath};
use shmf_core::solver::{empirical_constants, picard_slab, run, t_star, RunOptions, SolverConfig, Status};

fn fixed(t_end: f64, dt: f64) -> SolverConfig<f64> {
    SolverConfig {
        t_end,
        adaptive: false,
        dt_init: dt,
        dt_min: dt / 2.0,
        blowup_grad_threshold: 1e9,
        snapshot_every: 0,
        ..Default::default()
    }
}

#[test]
fn first_order_convergence() {
    let b = build_basis::<f64>(32, 96).unwrap();
    let h0 = chi_field(&b, 3.0);
    let solve = |dt: f64| run(&h0, &fixed(0.1, dt), &mut ZeroPath::new(32), &RunOptions::default()).unwrap().final_h;
    let reference = solve(2f64.powi(-20));
    let errs: Vec<f64> = (8..=11).map(|j| (&solve(2f64.powi(-j)) - &reference).norm_beta(1.0)).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.7..=2.3).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn continuous_dependence_on_data() {
    let b = build_basis::<f64>(32, 96).unwrap();
    let beta = 2.5;
    let h0 = chi_field(&b, 3.0);
    let g = standard_normals(5, 0, 0, 32);
    let d = ModalField::from_coeffs(&b, g.iter().zip(b.zeros()).map(|(&g, &x)| g * x.powf(-beta - 1.0)).collect()).unwrap();
    let d = d.scale(1.0 / d.norm_beta(beta));
    let cfg = SolverConfig { t_end: 0.05, tol: 1e-8, blowup_grad_threshold: 1e9, snapshot_every: 0, ..Default::default() };
    let opts = RunOptions { record_times: vec![0.05], ..Default::default() };
    let base = run(&h0, &cfg, &mut ZeroPath::new(32), &opts).unwrap().final_h;
    let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eta| {
            let pert = h0.lincomb(1.0, &d, eta).unwrap();
            let h = run(&pert, &cfg, &mut ZeroPath::new(32), &opts).unwrap().final_h;
            (&h - &base).norm_beta(beta) / eta
        })
        .collect();
    for r in &ratios {
        assert!(r.is_finite() && *r < 10.0);
    }
    assert!(((ratios[1] - ratios[2]) / ratios[2]).abs() < 0.1, "{ratios:?}");
    assert!(((ratios[0] - ratios[2]) / ratios[2]).abs() < 0.2, "{ratios:?}");
}

#[test]
fn small_data_decays() {
    let b = build_basis::<f64>(64, 160).unwrap();
    let h0 = chi_field(&b, 0.1);
    let cfg = SolverConfig { snapshot_every: 0, ..Default::default() };
    let tr = run(&h0, &cfg, &mut ZeroPath::new(64), &RunOptions::default()).unwrap();
    assert_eq!(tr.status, Status::Completed);
    assert!(tr.final_h.norm_h() <= 1e-3 * h0.norm_h());
}

fn recorded(tr: &shmf_core::solver::Trajectory<f64>) -> Vec<(f64, Vec<f64>)> {
    tr.records.iter().map(|(t, h)| (*t, h.synthesize())).collect()
}

#[test]
fn comparison_ordering_with_shared_noise() {
    let b = build_basis::<f64>(64, 160).unwrap();
    let sp = Arc::new(make_spectrum(SpectrumKind::PowerLaw, 0.05, 3.5, &b, 2.5).unwrap());
    let times: Vec<f64> = (1..=64).map(|i| 0.2 * i as f64 / 64.0).collect();
    let cfg = SolverConfig { t_end: 0.2, snapshot_every: 0, ..Default::default() }.with_blowup_threshold(100.0);
    let opts = RunOptions { record_times: times, ..Default::default() };
    for seed in 0..3 {
        let a = run(&chi_field(&b, 1.0), &cfg, &mut OuPath::new(Arc::clone(&sp), seed, 0), &opts).unwrap();
        let c = run(&chi_field(&b, 2.0), &cfg, &mut OuPath::new(Arc::clone(&sp), seed, 0), &opts).unwrap();
        let (ra, rc) = (recorded(&a), recorded(&c));
        assert!(!ra.is_empty());
        for ((ta, ha), (tc, hc)) in ra.iter().zip(&rc) {
            assert_eq!(ta, tc);
            let m = ha.iter().zip(hc).map(|(x, y)| y - x).fold(f64::INFINITY, f64::min);
            assert!(m >= -1e-6, "seed {seed} t {ta}: {m}");
        }
    }
}

#[test]
fn norms_diverge_together_at_blowup() {
    let b = build_basis::<f64>(64, 160).unwrap();
    let cfg = SolverConfig::default().with_blowup_threshold(100.0);
    let tr = run(&chi_field(&b, 8.0), &cfg, &mut ZeroPath::new(64), &RunOptions::default()).unwrap();
    assert_eq!(tr.status, Status::BlownUp);
    assert!(tr.tau.unwrap() < 1.0);
    assert!(tr.tail.len() >= 6);
    let tail = &tr.tail[tr.tail.len() - 6..];
    for beta in [2.1, 2.5, 3.0] {
        for w in tail.windows(2) {
            assert!(w[1].1.norm_beta(beta) > w[0].1.norm_beta(beta), "beta {beta}");
        }
    }
    let last = tr.snapshots.last().unwrap();
    assert!(last.grad0 >= 100.0);
}

#[test]
fn runs_are_deterministic() {
    let b = build_basis::<f64>(32, 96).unwrap();
    let sp = Arc::new(make_spectrum(SpectrumKind::PowerLaw, 0.1, 3.5, &b, 2.5).unwrap());
    let cfg = SolverConfig { t_end: 0.05, ..Default::default() };
    let go = || {
        let tr = run(&chi_field(&b, 2.0), &cfg, &mut OuPath::new(Arc::clone(&sp), 42, 7), &RunOptions::default()).unwrap();
        let mut bits: Vec<u64> = tr.final_h.coeffs().iter().map(|v| v.to_bits()).collect();
        for s in &tr.snapshots {
            bits.extend([s.t.to_bits(), s.norm_beta.to_bits(), s.grad0.to_bits(), s.energy.to_bits()]);
        }
        bits
    };
    assert_eq!(go(), go());
}

#[test]
fn picard_slab_matches_fine_exponential_euler() {
    let b = build_basis::<f64>(32, 96).unwrap();
    let beta = 1.5;
    let consts = empirical_constants(&b, beta, 32, 0).unwrap();
    let sp = Arc::new(make_spectrum(SpectrumKind::PowerLaw, 0.05, 3.5, &b, 2.5).unwrap());
    let h0 = chi_field(&b, 1.0);
    let ts = t_star(&consts, h0.norm_beta(beta) + 1.0, beta);
    let mut path = OuPath::new(Arc::clone(&sp), 1, 0);
    let rep = picard_slab(&h0, &mut path, 0.0, ts, beta, false).unwrap();
    assert!(rep.ratios.iter().all(|&r| r <= 0.75));
    let z = ModalField::from_coeffs(&b, rep.z_end.clone()).unwrap();
    let hp = &rep.v_end + &z;
    let dt = shmf_core::solver::pow2_floor(ts) / 1024.0;
    let cfg = SolverConfig { beta, ..fixed(ts, dt) };
    let mut path = OuPath::new(Arc::clone(&sp), 1, 0);
    let tr = run(&h0, &cfg, &mut path, &RunOptions::default()).unwrap();
    assert!((&tr.final_h - &hp).norm_beta(beta) <= 1e-4);
    assert!(path.sample(ts).is_ok());
}
