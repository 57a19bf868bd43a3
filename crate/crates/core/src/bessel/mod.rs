//! Bessel kernel: `J0`, `J1`, `J1'`, the positive zeros of `J1`, and the
//! Fourier-Bessel eigenbasis of the radial operator `∂rr + ∂r/r - 1/r²`
//! on the unit interval with Dirichlet conditions.
//!
//! Evaluation is split in three regimes:
//!
//! * `y < 8`: ascending power series (at most two digits of cancellation);
//! * `8 <= y < 25`: Miller backward recurrence normalised by
//!   `J0 + 2 Σ J_{2k} = 1`;
//! * `y >= 25`: Hankel asymptotic expansion summed until the terms stop
//!   decreasing.

mod basis;
mod cache;
mod quadrature;

pub use basis::{build_basis, default_quad_order, EigenBasis};
pub use cache::{load_or_build, BasisCache, CACHE_DIR_ENV, CACHE_MAGIC, CACHE_VERSION};
pub use quadrature::{gauss_legendre, gauss_legendre_unit};

use crate::error::{domain, Result, ShmfError};
use crate::scalar::Real;

/// Largest argument accepted by [`eval_bessel`].
pub const MAX_ARGUMENT: f64 = 1.0e6;

/// Largest zero count accepted by [`compute_zeros`].
pub const MAX_ZEROS: usize = 100_000;

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// Order of the Bessel function of the first kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselOrder {
    Zero,
    One,
}

/// Evaluates `J0(y)` or `J1(y)` for `0 <= y <= 1e6`.
pub fn eval_bessel<T: Real>(order: BesselOrder, y: T) -> Result<T> {
    if !(y >= T::zero()) || y > T::lit(MAX_ARGUMENT) {
        return Err(domain(
            "eval_bessel",
            format!("argument {y} outside [0, {MAX_ARGUMENT}]"),
        ));
    }
    let (j0, j1) = j0_j1(y);
    Ok(match order {
        BesselOrder::Zero => j0,
        BesselOrder::One => j1,
    })
}

/// `J0(y)` for `y >= 0`, no range check.
#[inline]
pub fn j0<T: Real>(y: T) -> T {
    j0_j1(y).0
}

/// `J1(y)` for `y >= 0`, no range check.
#[inline]
pub fn j1<T: Real>(y: T) -> T {
    j0_j1(y).1
}

/// `J1'(y) = J0(y) - J1(y)/y`, with the limit `1/2` at the origin.
pub fn j1_prime<T: Real>(y: T) -> T {
    if y == T::zero() {
        return T::lit(0.5);
    }
    if y < T::lit(1e-3) {
        // 1/2 - 3y²/16 + 5y⁴/384
        let y2 = y * y;
        return T::lit(0.5) - T::lit(3.0 / 16.0) * y2 + T::lit(5.0 / 384.0) * y2 * y2;
    }
    let (j0, j1) = j0_j1(y);
    j0 - j1 / y
}

/// Both `J0(y)` and `J1(y)` from a single evaluation path.
pub fn j0_j1<T: Real>(y: T) -> (T, T) {
    let y = y.abs();
    if y < T::lit(SERIES_LIMIT) {
        (series_j0(y), series_j1(y))
    } else if y < T::lit(ASYMPTOTIC_LIMIT) {
        miller_j0_j1(y)
    } else {
        (hankel(0, y), hankel(1, y))
    }
}

fn series_j0<T: Real>(y: T) -> T {
    let q = -(y * y) / T::lit(4.0);
    let mut term = T::one();
    let mut sum = T::one();
    for m in 1..60 {
        let mf = T::from_usize_lossy(m);
        term *= q / (mf * mf);
        sum += term;
        if term.abs() <= T::epsilon() * T::lit(1e-3) * sum.abs().max(T::one()) {
            break;
        }
    }
    sum
}

fn series_j1<T: Real>(y: T) -> T {
    let half = y / T::lit(2.0);
    let q = -(y * y) / T::lit(4.0);
    let mut term = half;
    let mut sum = half;
    for m in 1..60 {
        let mf = T::from_usize_lossy(m);
        term *= q / (mf * (mf + T::one()));
        sum += term;
        if term.abs() <= T::epsilon() * T::lit(1e-3) * sum.abs() {
            break;
        }
    }
    sum
}

/// Miller's backward recurrence `J_{n-1} = (2n/y) J_n - J_{n+1}`.
fn miller_j0_j1<T: Real>(y: T) -> (T, T) {
    let yf = y.to_f64_lossy();
    let mut start = (yf + 30.0 + 4.0 * yf.sqrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let two = T::lit(2.0);
    let big = T::lit(1e10);
    let mut next = T::zero(); // J_{n+1}
    let mut cur = T::lit(1e-30); // J_n
    let mut norm = if start.is_multiple_of(2) { two * cur } else { T::zero() };
    let mut j1 = T::zero();
    let mut n = start;
    while n > 0 {
        let prev = two * T::from_usize_lossy(n) / y * cur - next;
        next = cur;
        cur = prev;
        n -= 1;
        if n == 1 {
            j1 = cur;
        }
        if n.is_multiple_of(2) && n > 0 {
            norm += two * cur;
        }
        if cur.abs() > big {
            let s = T::one() / big;
            cur *= s;
            next *= s;
            norm *= s;
            j1 *= s;
        }
    }
    norm += cur;
    (cur / norm, j1 / norm)
}

/// Hankel expansion `J_ν(y) = sqrt(2/(πy)) (P cos χ - Q sin χ)`, `χ = y - (ν/2 + 1/4)π`.
fn hankel<T: Real>(order: u32, y: T) -> T {
    let mu = T::lit(4.0 * f64::from(order * order));
    let eight_y = T::lit(8.0) * y;
    let mut p = T::one();
    let mut q = T::zero();
    let mut term = T::one();
    let mut prev_abs = T::infinity();
    for k in 1..200usize {
        let odd = T::from_usize_lossy(2 * k - 1);
        term = term * (mu - odd * odd) / (T::from_usize_lossy(k) * eight_y);
        let a = term.abs();
        if a > prev_abs || a < T::epsilon() * T::lit(1e-2) {
            break;
        }
        prev_abs = a;
        // a_k / y^k alternates between Q (odd k) and P (even k) with signs (-1)^{⌊k/2⌋}
        let sign = if (k / 2) % 2 == 0 { T::one() } else { -T::one() };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
    }
    let phase = y - (T::lit(0.5 * f64::from(order)) + T::lit(0.25)) * T::PI();
    (T::lit(2.0) / (T::PI() * y)).sqrt() * (p * phase.cos() - q * phase.sin())
}

/// McMahon estimate of the `k`-th positive zero of `J1` (1-based).
pub fn mcmahon_guess(k: usize) -> f64 {
    let b = (k as f64 + 0.25) * std::f64::consts::PI;
    let mu = 4.0;
    let eb = 8.0 * b;
    b - (mu - 1.0) / eb
        - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * eb.powi(3))
        - 32.0 * (mu - 1.0) * (83.0 * mu * mu - 982.0 * mu + 3779.0) / (15.0 * eb.powi(5))
}

/// First `n` positive zeros of `J1`, ascending, each with `|J1(x_k)| <= 1e-12`.
pub fn compute_zeros<T: Real>(n: usize) -> Result<Vec<T>> {
    if n == 0 || n > MAX_ZEROS {
        return Err(domain(
            "compute_zeros",
            format!("zero count {n} outside [1, {MAX_ZEROS}]"),
        ));
    }
    let mut zeros = Vec::with_capacity(n);
    let mut last = T::zero();
    for k in 1..=n {
        let x = refine_zero::<T>(k)?;
        if x <= last {
            return Err(ShmfError::Internal(format!(
                "zero {k} ({x}) not above its predecessor ({last})"
            )));
        }
        last = x;
        zeros.push(x);
    }
    Ok(zeros)
}

fn refine_zero<T: Real>(k: usize) -> Result<T> {
    let guess = mcmahon_guess(k);
    let mut half_width = 0.5;
    let (mut lo, mut hi, mut flo);
    loop {
        lo = T::lit(guess - half_width);
        hi = T::lit(guess + half_width);
        flo = j1(lo);
        let fhi = j1(hi);
        if flo * fhi <= T::zero() {
            break;
        }
        half_width += 0.25;
        if half_width > 1.5 {
            return Err(ShmfError::Internal(format!(
                "could not bracket zero {k} of J1 around {guess}"
            )));
        }
    }
    let mut x = T::lit(guess);
    let two = T::lit(2.0);
    for _ in 0..200 {
        let (j0v, j1v) = j0_j1(x);
        if j1v == T::zero() {
            return Ok(x);
        }
        if j1v * flo < T::zero() {
            hi = x;
        } else {
            lo = x;
            flo = j1v;
        }
        let newton = x - j1v / (j0v - j1v / x);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) / two
        };
        let settled = (next - x).abs() <= T::epsilon() * T::lit(4.0) * x
            || (hi - lo) <= T::epsilon() * T::lit(4.0) * x;
        x = next;
        if settled {
            break;
        }
    }
    let residual = j1(x).abs();
    let tol = T::lit(1e-12).max(T::epsilon().sqrt() * T::lit(1e-2));
    if residual <= tol {
        Ok(x)
    } else {
        Err(ShmfError::Internal(format!(
            "zero {k} of J1 did not converge (residual {residual})"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // (y, J0(y), J1(y)) from 30-digit evaluations.
    const REF: &[(f64, f64, f64)] = &[
        (0.5, 0.938_469_807_240_812_9, 0.242_268_457_674_873_9),
        (3.0, -0.260_051_954_901_933_45, 0.339_058_958_525_936_5),
        (7.9, 0.194_361_844_841_278_25, 0.219_179_399_921_751_2),
        (8.1, 0.147_517_454_044_377_66, 0.247_607_766_981_592_87),
        (12.5, 0.146_884_054_700_421_1, -0.165_483_804_614_759_73),
        (24.9, 0.083_245_968_353_015_5, -0.134_855_699_531_408_86),
        (25.1, 0.108_275_671_499_949_45, -0.114_634_784_134_422_57),
        (49.0, -0.052_900_033_322_273_51, -0.101_506_128_034_310_56),
        (1000.0, 0.024_786_686_152_420_176, 0.004_728_311_907_089_524),
        (123456.0, -0.002_268_200_935_737_398_3, -0.000_109_177_285_255_385_73),
        (987654.321, 0.000_750_585_741_377_184, -0.000_284_953_237_917_759_7),
    ];

    #[test]
    fn trivial_values() {
        assert_eq!(eval_bessel(BesselOrder::One, 0.0_f64).unwrap(), 0.0);
        assert_eq!(eval_bessel(BesselOrder::Zero, 0.0_f64).unwrap(), 1.0);
    }

    #[test]
    fn rejects_out_of_range_arguments() {
        assert!(eval_bessel(BesselOrder::Zero, -1.0_f64).is_err());
        assert!(eval_bessel(BesselOrder::One, 2.0e6_f64).is_err());
        assert!(eval_bessel(BesselOrder::One, f64::NAN).is_err());
    }

    #[test]
    fn matches_reference_table() {
        for &(y, want0, want1) in REF {
            let (got0, got1) = j0_j1(y);
            // absolute below 50, relative to the envelope sqrt(2/(πy)) beyond
            let tol = if y <= 50.0 {
                1e-12
            } else {
                1e-9 * (2.0 / (std::f64::consts::PI * y)).sqrt()
            };
            assert!((got0 - want0).abs() <= tol, "J0({y}) = {got0}, want {want0}");
            assert!((got1 - want1).abs() <= tol, "J1({y}) = {got1}, want {want1}");
        }
    }

    #[test]
    fn regimes_agree_at_the_seams() {
        let y = SERIES_LIMIT;
        assert!((series_j0(y) - miller_j0_j1(y).0).abs() < 1e-13);
        assert!((series_j1(y) - miller_j0_j1(y).1).abs() < 1e-13);
        let y = ASYMPTOTIC_LIMIT;
        assert!((hankel(0, y) - miller_j0_j1(y).0).abs() < 1e-13);
        assert!((hankel(1, y) - miller_j0_j1(y).1).abs() < 1e-13);
        // Miller also works on the neighbouring regimes, use it as a cross check
        for &y in &[5.0, 7.5, 30.0, 45.0] {
            let (m0, m1): (f64, f64) = miller_j0_j1(y);
            let (r0, r1): (f64, f64) = j0_j1(y);
            assert!((m0 - r0).abs() < 1e-13 && (m1 - r1).abs() < 1e-13, "y = {y}");
        }
    }

    #[test]
    fn derivative_at_origin_is_one_half() {
        assert_eq!(j1_prime(0.0_f64), 0.5);
        let y = 2e-3_f64;
        assert!((j1_prime(y) - (j0(y) - j1(y) / y)).abs() < 1e-14);
    }

    #[test]
    fn zero_count_bounds() {
        assert!(compute_zeros::<f64>(0).is_err());
        assert!(compute_zeros::<f64>(MAX_ZEROS + 1).is_err());
    }

    #[test]
    fn single_precision_zero_is_close() {
        let z = compute_zeros::<f32>(3).unwrap();
        assert!((z[0] - 3.831_706).abs() < 1e-4);
        assert!((z[2] - 10.173_468).abs() < 1e-3);
    }
}
