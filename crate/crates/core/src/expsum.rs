//! Exponential sums `f`, `F`, `W`, `v`/`V*` and the complete sums `S(q, a)`.
//!
//! Every phase `n^k alpha mod 1` is reduced exactly (fixed point or residue
//! arithmetic) before it reaches floating point. Summation runs over fixed
//! chunks in ascending order with compensated accumulation, so results do not
//! depend on the number of worker threads.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::gcd;
use crate::error::{Error, Result};
use crate::phase::Alpha;
use crate::primewindow::PrimeWindow;
use crate::quadrature;
use crate::scalar::{KahanSum, Real};

const CHUNK: usize = 4096;
/// Largest term count evaluated term by term in `v`/`V*`.
pub const EXACT_TERM_CAP: u128 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FloatAccumulation,
    RationalExact,
    IntegralSurrogate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpSum<T: Real> {
    pub re: T,
    pub im: T,
    pub method: Method,
    pub terms: u64,
    /// Bound on the distance to the exact sum; zero outside surrogate mode.
    pub error_bound: T,
}

impl<T: Real> ExpSum<T> {
    fn new(z: Complex<T>, method: Method, terms: u64) -> Self {
        Self { re: z.re, im: z.im, method, terms, error_bound: T::zero() }
    }

    pub fn value(&self) -> Complex<T> {
        Complex::new(self.re, self.im)
    }

    pub fn abs(&self) -> T {
        self.re.hypot(self.im)
    }
}

/// `n^k` as an exact integer below `2^127`.
pub fn checked_power(n: u128, k: u32) -> Result<u128> {
    n.checked_pow(k)
        .filter(|&v| v <= i128::MAX as u128)
        .ok_or_else(|| Error::Overflow(format!("{n}^{k} exceeds 2^127; shrink X or k")))
}

/// `sum w_i e(n_i^k alpha)` over `(n_i, w_i)` in the given order.
pub fn weighted_power_sum<T: Real>(terms: &[(u64, f64)], k: u32, alpha: Alpha) -> Result<ExpSum<T>> {
    if let Some(&(n, _)) = terms.iter().max_by_key(|e| e.0) {
        checked_power(n as u128, k)?;
    }
    let partials: Vec<KahanSum<T>> = terms
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = KahanSum::new();
            for &(n, w) in chunk {
                let t: T = alpha.frac_of((n as u128).pow(k));
                acc.add(T::unit(t) * T::of(w));
            }
            acc
        })
        .collect();
    let mut total = KahanSum::new();
    for p in &partials {
        total.merge(p);
    }
    let method = match alpha {
        Alpha::Rational { .. } => Method::RationalExact,
        Alpha::Fixed(_) => Method::FloatAccumulation,
    };
    Ok(ExpSum::new(total.value(), method, terms.len() as u64))
}

/// `f(alpha) = sum_{p in window} (log p) e(p^k alpha)`.
pub fn f_sum<T: Real>(w: &PrimeWindow, k: u32, alpha: Alpha) -> Result<ExpSum<T>> {
    if w.is_empty() {
        return Err(Error::input("prime window is empty"));
    }
    let terms: Vec<(u64, f64)> = w.iter().collect();
    weighted_power_sum(&terms, k, alpha)
}

/// `sum_{n in support} Lambda(n) e(n^k alpha)`.
pub fn lambda_sum<T: Real>(support: &[(u64, f64)], k: u32, alpha: Alpha) -> Result<ExpSum<T>> {
    weighted_power_sum(support, k, alpha)
}

fn unit_range_sum<T: Real>(start: u64, end: u64, k: u32, alpha: Alpha) -> Result<ExpSum<T>> {
    if end < start {
        return Err(Error::input("summation range is empty"));
    }
    let terms: Vec<(u64, f64)> = (start..=end).map(|m| (m, 1.0)).collect();
    weighted_power_sum(&terms, k, alpha)
}

/// `F(alpha) = sum_{m in [floor(X-Y), ceil(X+Y)]} e(m^k alpha)`.
#[allow(non_snake_case)]
pub fn F_sum<T: Real>(x: f64, y: f64, k: u32, alpha: Alpha) -> Result<ExpSum<T>> {
    let (lo, hi) = crate::primewindow::window_bounds(x, y)?;
    unit_range_sum(lo, hi, k, alpha)
}

/// `W(alpha; U, V) = sum_{U <= m <= U + V} e(m^k alpha)`.
#[allow(non_snake_case)]
pub fn W_sum<T: Real>(u: f64, v: f64, k: u32, alpha: Alpha) -> Result<ExpSum<T>> {
    if !(u >= 0.0 && v >= 0.0) {
        return Err(Error::input("U and V must be non-negative"));
    }
    unit_range_sum(u.ceil() as u64, (u + v).floor() as u64, k, alpha)
}

fn ceil_power(x: f64, k: u32) -> Result<u128> {
    if x < 0.0 {
        return Err(Error::input("endpoint must be non-negative"));
    }
    if x.fract() == 0.0 && x < 1.8e19 {
        return checked_power(x as u128, k);
    }
    let v = x.powi(k as i32).ceil();
    if v > i128::MAX as f64 {
        return Err(Error::Overflow(format!("{x}^{k} exceeds 2^127")));
    }
    Ok(v as u128)
}

fn floor_power(x: f64, k: u32) -> Result<u128> {
    if x.fract() == 0.0 && x < 1.8e19 {
        return checked_power(x as u128, k);
    }
    let v = x.powi(k as i32).floor();
    if v > i128::MAX as f64 {
        return Err(Error::Overflow(format!("{x}^{k} exceeds 2^127")));
    }
    Ok(v as u128)
}

/// Integer range `[ceil(N1^k), floor(N2^k)]`.
pub fn power_range(n1: f64, n2: f64, k: u32) -> Result<(u128, u128)> {
    let lo = ceil_power(n1, k)?.max(1);
    let hi = floor_power(n2, k)?;
    if hi < lo {
        return Err(Error::input("power range is empty"));
    }
    Ok((lo, hi))
}

/// Weight `k^{-1} m^{-1+1/k}` of the singular-integral sums.
#[inline]
pub fn vstar_weight(m: u128, k: u32) -> f64 {
    (m as f64).powf(1.0 / k as f64 - 1.0) / k as f64
}

/// `V*(lambda) = k^{-1} sum_{N1^k <= m <= N2^k} m^{-1+1/k} e(lambda m)`.
///
/// Term by term up to [`EXACT_TERM_CAP`] terms. Above the cap the sum is
/// replaced by `int_{N1}^{N2} e(lambda u^k) du` plus the trapezoid and first
/// derivative end corrections, and `error_bound` carries the remainder
/// estimate `(1/12) int |g''|`; without `allow_surrogate` that case is an error.
pub fn vstar_sum<T: Real>(n1: f64, n2: f64, k: u32, lambda: f64, allow_surrogate: bool) -> Result<ExpSum<T>> {
    let (m1, m2) = power_range(n1, n2, k)?;
    let count = m2 - m1 + 1;
    if count <= EXACT_TERM_CAP {
        let alpha = Alpha::from_f64(lambda);
        let starts: Vec<u128> = (0..count.div_ceil(CHUNK as u128)).map(|i| m1 + i * CHUNK as u128).collect();
        let partials: Vec<KahanSum<T>> = starts
            .par_iter()
            .map(|&s| {
                let e = (s + CHUNK as u128 - 1).min(m2);
                let mut acc = KahanSum::new();
                for m in s..=e {
                    let t: T = alpha.frac_of(m);
                    acc.add(T::unit(t) * T::of(vstar_weight(m, k)));
                }
                acc
            })
            .collect();
        let mut total = KahanSum::new();
        for p in &partials {
            total.merge(p);
        }
        return Ok(ExpSum::new(total.value(), Method::FloatAccumulation, count as u64));
    }
    if !allow_surrogate {
        return Err(Error::budget(format!(
            "{count} terms exceed the exact cap of {EXACT_TERM_CAP}; enable the integral surrogate"
        )));
    }
    Ok(vstar_surrogate(m1, m2, k, lambda))
}

fn vstar_surrogate<T: Real>(m1: u128, m2: u128, k: u32, lambda: f64) -> ExpSum<T> {
    let kf = k as f64;
    let t0 = (m1 as f64).powf(1.0 / kf);
    let t1 = (m2 as f64).powf(1.0 / kf);
    let tau = std::f64::consts::TAU;
    let integral = quadrature::oscillatory_power_integral(t0, t1, k, lambda);
    let c = 1.0 / kf - 1.0;
    let g = |u: f64| {
        let t = lambda * u;
        let z = f64::unit(t - t.round());
        z * (u.powf(c) / kf)
    };
    let dg = |u: f64| g(u) * Complex::new(c / u, tau * lambda);
    let (a, b) = (m1 as f64, m2 as f64);
    let value = integral + (g(a) + g(b)) * 0.5 + (dg(b) - dg(a)) / 12.0;
    let bw = tau * lambda.abs();
    let g2max = a.powf(c) / kf * (bw * bw + 2.0 * c.abs() * bw / a + (c * (c - 1.0)).abs() / (a * a));
    let bound = (b - a) * g2max / 12.0;
    let mut out = ExpSum::new(Complex::new(T::of(value.re), T::of(value.im)), Method::IntegralSurrogate, (m2 - m1 + 1) as u64);
    out.error_bound = T::of(bound);
    out
}

/// `v(beta)` over `[(X-Y)^k, (X+Y)^k]`.
pub fn v_sum<T: Real>(x: f64, y: f64, k: u32, beta: f64, allow_surrogate: bool) -> Result<ExpSum<T>> {
    vstar_sum(x - y, x + y, k, beta, allow_surrogate)
}

/// Histogram `c[j] = #{1 <= r <= q : gcd(r, q) = 1, r^k = j mod q}`.
pub fn unit_power_histogram(q: u64, k: u32) -> Vec<u64> {
    let mut c = vec![0u64; q as usize];
    for r in 1..=q {
        if gcd(r as u128, q as u128) == 1 {
            c[crate::arith::pow_mod(r, k as u64, q) as usize] += 1;
        }
    }
    c
}

/// `S(q, a) = sum_{1 <= r <= q, (r, q) = 1} e(a r^k / q)`, by exact residues.
pub fn s_qa<T: Real>(q: u64, a: i64, k: u32) -> ExpSum<T> {
    assert!(q >= 1, "modulus must be positive");
    let hist = unit_power_histogram(q, k);
    let a = a.rem_euclid(q as i64) as u128;
    let mut acc = KahanSum::new();
    let mut terms = 0;
    for (j, &c) in hist.iter().enumerate() {
        if c == 0 {
            continue;
        }
        terms += c;
        let r = (a * j as u128) % q as u128;
        let r = if 2 * r >= q as u128 { r as f64 - q as f64 } else { r as f64 };
        acc.add(T::unit(T::of(r / q as f64)) * T::of(c as f64));
    }
    ExpSum::new(acc.value(), Method::RationalExact, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::euler_phi;
    use crate::primewindow::sieve_window;

    fn close(z: Complex<f64>, re: f64, im: f64, tol: f64) -> bool {
        (z.re - re).abs() <= tol && (z.im - im).abs() <= tol
    }

    #[test]
    fn f_at_zero_and_half() {
        let w = sieve_window(1000.0, 100.0).unwrap();
        let total = w.sum_logs();
        let z: ExpSum<f64> = f_sum(&w, 2, Alpha::from_f64(0.0)).unwrap();
        assert!(close(z.value(), total, 0.0, 1e-9));
        let h: ExpSum<f64> = f_sum(&w, 2, Alpha::from_f64(0.5)).unwrap();
        assert!(close(h.value(), -total, 0.0, 1e-9));
        let hr: ExpSum<f64> = f_sum(&w, 2, Alpha::ratio(1, 2)).unwrap();
        assert_eq!(hr.method, Method::RationalExact);
        assert!(close(hr.value(), -total, 0.0, 1e-9));
    }

    #[test]
    fn f_regrouping_at_third() {
        let w = sieve_window(10.0, 5.0).unwrap();
        let z: ExpSum<f64> = f_sum(&w, 2, Alpha::ratio(1, 3)).unwrap();
        let mut oracle = Complex::new(0.0, 0.0);
        for r in 0..3u64 {
            let mass: f64 = w.iter().filter(|(p, _)| p % 3 == r).map(|(_, l)| l).sum();
            oracle += f64::unit((r * r % 3) as f64 / 3.0) * mass;
        }
        assert!((z.value() - oracle).norm() < 1e-12);
        let zf: ExpSum<f64> = f_sum(&w, 2, Alpha::from_f64(1.0 / 3.0)).unwrap();
        assert!((zf.value() - oracle).norm() < 1e-12);
    }

    #[test]
    fn f_single_precision_tracks_double() {
        let w = sieve_window(5000.0, 300.0).unwrap();
        let a = Alpha::from_f64(0.123_456_789);
        let d: ExpSum<f64> = f_sum(&w, 3, a).unwrap();
        let s: ExpSum<f32> = f_sum(&w, 3, a).unwrap();
        assert!((d.re - s.re as f64).abs() < 1e-3 * d.terms as f64);
    }

    #[test]
    fn overflow_is_reported() {
        let w = PrimeWindow::from_primes(vec![1_000_003]).unwrap();
        assert!(matches!(f_sum::<f64>(&w, 7, Alpha::from_f64(0.1)), Err(Error::Overflow(_))));
    }

    #[test]
    fn capital_f_and_w_examples() {
        let z: ExpSum<f64> = F_sum(50.0, 7.0, 3, Alpha::from_f64(0.0)).unwrap();
        assert!(close(z.value(), 15.0, 0.0, 1e-12));
        let w: ExpSum<f64> = W_sum(1.0, 3.0, 1, Alpha::ratio(1, 4)).unwrap();
        assert!(close(w.value(), 0.0, 0.0, 1e-12));
        let f: ExpSum<f64> = F_sum(5.0, 2.0, 2, Alpha::ratio(1, 2)).unwrap();
        assert!(close(f.value(), -1.0, 0.0, 1e-12));
    }

    #[test]
    fn v_at_zero_and_k1() {
        let v0: ExpSum<f64> = v_sum(200.0, 50.0, 2, 0.0, false).unwrap();
        assert!(v0.im.abs() < 1e-12);
        assert!((v0.re - 100.0).abs() <= 2.0);
        for beta in [0.001, 0.01, 0.1, 0.37] {
            let v: ExpSum<f64> = v_sum(200.0, 50.0, 2, beta, false).unwrap();
            assert!(v.abs() <= v0.re + 1e-9);
        }
        // k = 1: plain geometric sum over [150, 250]
        let beta = 0.013;
        let v: ExpSum<f64> = v_sum(200.0, 50.0, 1, beta, false).unwrap();
        let r = f64::unit(beta);
        let closed = f64::unit(150.0 * beta) * (Complex::new(1.0, 0.0) - r.powu(101)) / (Complex::new(1.0, 0.0) - r);
        assert!((v.value() - closed).norm() < 1e-10);
    }

    #[test]
    fn surrogate_matches_exact_near_zero() {
        // 10^7-term range, small beta: surrogate within its own bound.
        let exact: ExpSum<f64> = vstar_sum(3000.0, 3500.0, 2, 2e-9, false).unwrap();
        let sur: ExpSum<f64> = vstar_surrogate(9_000_000, 12_250_000, 2, 2e-9);
        assert_eq!(sur.method, Method::IntegralSurrogate);
        assert!((exact.value() - sur.value()).norm() <= sur.error_bound + 1e-9);
        assert!(matches!(
            vstar_sum::<f64>(1e5, 2e5, 2, 0.0, false),
            Err(Error::Budget(_))
        ));
        assert!(vstar_sum::<f64>(1e5, 2e5, 2, 1e-12, true).is_ok());
    }

    #[test]
    fn complete_sums() {
        let s: ExpSum<f64> = s_qa(1, 0, 3);
        assert!(close(s.value(), 1.0, 0.0, 1e-15));
        let s: ExpSum<f64> = s_qa(2, 1, 2);
        assert!(close(s.value(), -1.0, 0.0, 1e-15));
        let s: ExpSum<f64> = s_qa(4, 1, 2);
        assert!(close(s.value(), 0.0, 2.0, 1e-15));
        for q in 1..60u64 {
            for a in 0..q as i64 {
                if gcd(a as u128, q as u128) != 1 {
                    continue;
                }
                let v: ExpSum<f64> = s_qa(q, a, 3);
                assert!(v.abs() <= euler_phi(q) as f64 + 1e-9);
            }
        }
    }
}
