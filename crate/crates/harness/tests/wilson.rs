use shmf_harness::mc::{wilson_interval, Z95};

fn ln_choose(n: u64, k: u64) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

fn pmf(n: u64, k: u64, p: f64) -> f64 {
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

/// Root of the score statistic `(k/n - p)² n / (p(1-p)) = z²` on one side of `k/n`.
fn score_root(k: u64, n: u64, z: f64, upper: bool) -> f64 {
    let ph = k as f64 / n as f64;
    let g = |p: f64| (ph - p).powi(2) * n as f64 - z * z * p * (1.0 - p);
    let (mut a, mut b) = if upper { (ph, 1.0) } else { (0.0, ph) };
    if g(if upper { b } else { a }) < 0.0 {
        return if upper { 1.0 } else { 0.0 };
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let inside = g(m) < 0.0;
        if inside == upper {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn bounds_invert_the_score_test() {
    for n in [1u64, 2, 5, 10, 17, 30, 200] {
        for k in 0..=n {
            let (lo, hi) = wilson_interval(k, n, Z95);
            assert!(0.0 <= lo && lo <= k as f64 / n as f64 && hi <= 1.0);
            assert!((lo - score_root(k, n, Z95, false)).abs() < 1e-12, "n {n} k {k}");
            assert!((hi - score_root(k, n, Z95, true)).abs() < 1e-12, "n {n} k {k}");
        }
    }
}

#[test]
fn coverage_against_binomial_probabilities() {
    // exact coverage P_p(p ∈ W(K, n)), K ~ Bin(n, p), averaged over p
    for n in [10u64, 20, 30] {
        let intervals: Vec<(f64, f64)> = (0..=n).map(|k| wilson_interval(k, n, Z95)).collect();
        let ps: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        let cover: Vec<f64> = ps
            .iter()
            .map(|&p| {
                intervals
                    .iter()
                    .enumerate()
                    .filter(|(_, &(lo, hi))| lo <= p && p <= hi)
                    .map(|(k, _)| pmf(n, k as u64, p))
                    .sum()
            })
            .collect();
        let mean = cover.iter().sum::<f64>() / cover.len() as f64;
        assert!((mean - 0.95).abs() < 0.02, "n {n}: mean coverage {mean}");
        let total: f64 = (0..=n).map(|k| pmf(n, k, 0.3)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
