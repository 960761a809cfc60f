//! Problem constants and elementary number theory.

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase::Phase;

pub const DEFAULT_DELTA: f64 = 0.005;
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Inputs of a run together with every constant derived from them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemParams {
    pub k: u32,
    pub s: u32,
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub theta: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub t_k: u32,
    #[serde(rename = "K")]
    pub big_k: u32,
    #[serde(rename = "R")]
    pub r: u64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "Q0")]
    pub q0: f64,
    pub theta_k: f64,
    /// Whether `4 K delta < min(theta - theta_k, 1 - theta)` holds.
    pub delta_admissible: bool,
}

/// `t_k`: 3 for squares, `k(k-1)` otherwise.
pub fn t_k(k: u32) -> u32 {
    if k == 2 {
        3
    } else {
        k * (k - 1)
    }
}

/// Exponent of the Weyl-type saving.
pub fn big_k(k: u32) -> u32 {
    if k == 2 {
        36
    } else {
        let t = t_k(k);
        2 * t * (t + 2)
    }
}

/// Threshold exponent `theta_k`.
pub fn theta_k(k: u32) -> f64 {
    match k {
        2 => 19.0 / 24.0,
        3 => 4.0 / 5.0,
        _ => 5.0 / 6.0,
    }
}

/// `R(k) = prod p^gamma` over primes with `(p-1) | k`, where `p^tau || k` and
/// `gamma = tau + 2` for `p = 2, tau > 0`, else `tau + 1`.
pub fn compute_r(k: u32) -> u64 {
    assert!(k >= 2, "k must be at least 2");
    let mut r = 1u64;
    for p in 2..=(k as u64 + 1) {
        if !is_prime_small(p) || k as u64 % (p - 1) != 0 {
            continue;
        }
        r *= p.pow(gamma(k, p));
    }
    r
}

/// `gamma(k, p)` from the definition of `R(k)`.
pub fn gamma(k: u32, p: u64) -> u32 {
    let mut tau = 0;
    let mut m = k as u64;
    while m % p == 0 {
        m /= p;
        tau += 1;
    }
    if p == 2 && tau > 0 {
        tau + 2
    } else {
        tau + 1
    }
}

/// Prime powers `p^gamma` dividing `R(k)`.
pub fn r_factors(k: u32) -> Vec<(u64, u32)> {
    (2..=(k as u64 + 1))
        .filter(|&p| is_prime_small(p) && k as u64 % (p - 1) == 0)
        .map(|p| (p, gamma(k, p)))
        .collect()
}

fn is_prime_small(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

/// Derive all constants from `(k, s, X, theta, delta, epsilon)`.
pub fn derive_params(k: u32, s: u32, x: f64, theta: f64, delta: f64, epsilon: f64) -> Result<ProblemParams> {
    if k < 2 {
        return Err(Error::input(format!("k = {k} must be at least 2")));
    }
    if s < 1 {
        return Err(Error::input("s must be at least 1"));
    }
    if !(x >= 2.0) || !x.is_finite() {
        return Err(Error::input(format!("X = {x} must be at least 2")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::input(format!("theta = {theta} must lie in (0, 1)")));
    }
    if !(delta > 0.0) || !(epsilon > 0.0) {
        return Err(Error::input("delta and epsilon must be positive"));
    }
    let y = x.powf(theta);
    let t = t_k(k);
    let kk = big_k(k);
    let p = x.powf(2.0 * kk as f64 * delta);
    let q = x.powi(k as i32 - 2) * y * y / p;
    let q0 = x.powi(1 - k as i32) * y.powi(2 * k as i32 - 1) / p;
    let th_k = theta_k(k);
    let delta_admissible = 4.0 * kk as f64 * delta < (theta - th_k).min(1.0 - theta);
    if !delta_admissible {
        warn!(
            "4K delta = {} is not below min(theta - theta_k, 1 - theta) = {}; exploratory run",
            4.0 * kk as f64 * delta,
            (theta - th_k).min(1.0 - theta)
        );
    }
    Ok(ProblemParams {
        k,
        s,
        x,
        y,
        theta,
        delta,
        epsilon,
        t_k: t,
        big_k: kk,
        r: compute_r(k),
        p,
        q,
        q0,
        theta_k: th_k,
        delta_admissible,
    })
}

impl ProblemParams {
    /// Same as [`derive_params`] but with the interval half-width given directly.
    pub fn with_y(k: u32, s: u32, x: f64, y: f64, delta: f64, epsilon: f64) -> Result<ProblemParams> {
        if !(y >= 1.0 && y <= x) {
            return Err(Error::input(format!("Y = {y} must satisfy 1 <= Y <= X")));
        }
        let theta = if y == x { 1.0 - f64::EPSILON } else { y.ln() / x.ln() };
        let theta = theta.max(f64::MIN_POSITIVE);
        let mut p = derive_params(k, s, x, theta, delta, epsilon)?;
        p.y = y;
        Ok(p)
    }
}

/// A reduced fraction `a/q` approximating `alpha`, with `err = |q alpha - a|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RationalApprox {
    pub a: u128,
    pub q: u128,
    pub err: f64,
    pub alpha: f64,
}

/// Continued-fraction convergents of a fixed-point phase, in increasing `q`.
///
/// Each item is `(a, q, err)` with `err = |q alpha - a|` computed exactly in
/// fixed point before the final conversion. Iteration stops when the
/// expansion terminates or the recurrences overflow.
pub struct Convergents {
    alpha: Phase,
    num: u128,
    den: u128,
    first: bool,
    // h_{n-1}, h_{n-2}, k_{n-1}, k_{n-2}
    h: (u128, u128),
    k: (u128, u128),
    index: usize,
    done: bool,
}

impl Convergents {
    pub fn new(alpha: Phase) -> Self {
        Self { alpha, num: alpha.0, den: 0, first: true, h: (1, 0), k: (0, 1), index: 0, done: false }
    }

    fn err_of(&self, q: u128, index: usize) -> u128 {
        // q alpha - a (mod 2^128); convergents alternate below/above alpha.
        let d = q.wrapping_mul(self.alpha.0);
        if index % 2 == 0 {
            d
        } else {
            d.wrapping_neg()
        }
    }
}

impl Iterator for Convergents {
    type Item = (u128, u128, u128);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        // Next partial quotient of the remaining fraction num/den (den = 2^128 initially).
        let quotient = if self.index == 0 {
            0
        } else if self.first {
            self.first = false;
            let a = self.num;
            let neg = a.wrapping_neg();
            let qd = neg / a + 1;
            let r = neg % a;
            self.den = a;
            self.num = r;
            qd
        } else {
            let qd = self.den / self.num;
            let r = self.den % self.num;
            self.den = self.num;
            self.num = r;
            qd
        };
        let h = quotient.checked_mul(self.h.0).and_then(|v| v.checked_add(self.h.1));
        let k = quotient.checked_mul(self.k.0).and_then(|v| v.checked_add(self.k.1));
        let (h, k) = match (h, k) {
            (Some(h), Some(k)) => (h, k),
            _ => {
                self.done = true;
                return None;
            }
        };
        self.h = (h, self.h.0);
        self.k = (k, self.k.0);
        let idx = self.index;
        self.index += 1;
        if self.num == 0 {
            self.done = true;
        }
        let e = self.err_of(k, idx);
        Some((h, k, e))
    }
}

pub(crate) fn fx_to_f64(e: u128) -> f64 {
    e as f64 / 340_282_366_920_938_463_463_374_607_431_768_211_456.0
}

/// Convergent `a/q` of `alpha` with the largest `q <= q_limit`.
///
/// Guarantees `|q alpha - a| <= 1/q_limit` and `gcd(a, q) = 1`.
pub fn best_approx(alpha: Phase, q_limit: f64) -> RationalApprox {
    let limit = q_limit.max(1.0).floor();
    let limit = if limit >= 3.4e38 { u128::MAX } else { limit as u128 };
    let mut best = (0u128, 1u128, alpha.0);
    for (a, q, e) in Convergents::new(alpha) {
        if q > limit {
            break;
        }
        best = (a, q, e);
    }
    RationalApprox { a: best.0, q: best.1, err: fx_to_f64(best.2), alpha: alpha.to_f64() }
}

/// Smallest-denominator convergent with `q <= q_max` and `|q alpha - a| <= tol`.
pub fn first_convergent_within(alpha: Phase, q_max: f64, tol: f64) -> Option<RationalApprox> {
    for (a, q, e) in Convergents::new(alpha) {
        if q as f64 > q_max {
            return None;
        }
        let err = fx_to_f64(e);
        if err <= tol {
            return Some(RationalApprox { a, q, err, alpha: alpha.to_f64() });
        }
    }
    None
}

/// Euler's totient.
pub fn euler_phi(q: u64) -> u64 {
    assert!(q >= 1);
    let mut n = q;
    let mut result = q;
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            while n % d == 0 {
                n /= d;
            }
            result -= result / d;
        }
        d += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// Divisors of `q` in ascending order.
pub fn divisors(q: u64) -> Vec<u64> {
    assert!(q >= 1);
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= q {
        if q % d == 0 {
            small.push(d);
            if d * d != q {
                large.push(q / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Prime factorization as `(p, e)` pairs in ascending `p`.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn gcd(a: u128, b: u128) -> u128 {
    num_integer::gcd(a, b)
}

/// `base^exp mod m` for `m < 2^64`.
pub fn pow_mod(base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let m128 = m as u128;
    let mut b = base as u128 % m128;
    let mut r = 1u128;
    while exp > 0 {
        if exp & 1 == 1 {
            r = r * b % m128;
        }
        b = b * b % m128;
        exp >>= 1;
    }
    r as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r_values() {
        assert_eq!(compute_r(2), 24);
        assert_eq!(compute_r(3), 2);
        assert_eq!(compute_r(4), 240);
    }

    #[test]
    fn r_divisibility() {
        for k in 2..=12u32 {
            let r = compute_r(k);
            assert_eq!(r % 2, 0);
            for p in 2..=(k as u64 + 1) {
                if is_prime_small(p) && k as u64 % (p - 1) == 0 {
                    assert_eq!(r % p, 0, "k={k} p={p}");
                }
            }
        }
    }

    #[test]
    fn derived_constants() {
        let p2 = derive_params(2, 5, 1e6, 0.85, 0.005, 0.01).unwrap();
        assert_eq!((p2.t_k, p2.big_k, p2.r), (3, 36, 24));
        let p3 = derive_params(3, 7, 1e6, 0.85, 0.005, 0.01).unwrap();
        assert_eq!((p3.t_k, p3.big_k), (6, 96));
        let p4 = derive_params(4, 13, 1e6, 0.9, 0.001, 0.01).unwrap();
        assert_eq!((p4.t_k, p4.big_k), (12, 336));
        assert!(p2.q0 < p2.q);
        assert_eq!(p2.theta_k, 19.0 / 24.0);
    }

    #[test]
    fn derive_is_pure() {
        let a = derive_params(3, 9, 12345.5, 0.87, 0.002, 0.01).unwrap();
        let b = derive_params(3, 9, 12345.5, 0.87, 0.002, 0.01).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.q.to_bits(), b.q.to_bits());
    }

    #[test]
    fn derive_rejects_bad_input() {
        assert!(derive_params(2, 5, 1.5, 0.8, 0.005, 0.01).is_err());
        assert!(derive_params(2, 0, 100.0, 0.8, 0.005, 0.01).is_err());
        // delta too large only warns
        let p = derive_params(2, 5, 100.0, 0.8, 0.5, 0.01).unwrap();
        assert!(!p.delta_admissible);
    }

    #[test]
    fn approx_examples() {
        let z = best_approx(Phase::ZERO, 10.0);
        assert_eq!((z.a, z.q, z.err), (0, 1, 0.0));
        let t = best_approx(Phase::from_f64(1.0 / 3.0), 10.0);
        assert_eq!((t.a, t.q), (1, 3));
        assert!(t.err < 1e-15);
        let exact_third = best_approx(Phase::from_ratio(1, 3), 10.0);
        assert!(exact_third.err < 1e-38);
        let s = best_approx(Phase::from_f64(2f64.sqrt() - 1.0), 12.0);
        assert_eq!((s.a, s.q), (5, 12));
        let want = (12.0 * (2f64.sqrt() - 1.0) - 5.0).abs();
        assert!((s.err - want).abs() < 1e-15);
        // exhaustive: no q <= 12 does better
        let x = 2f64.sqrt() - 1.0;
        for q in 1..=12u32 {
            let e = (q as f64 * x - (q as f64 * x).round()).abs();
            assert!(e >= s.err - 1e-15);
        }
    }

    #[test]
    fn approx_nearest_for_large_alpha() {
        let r = best_approx(Phase::from_f64(0.9), 1.0);
        assert_eq!((r.a, r.q), (1, 1));
        assert!((r.err - 0.1).abs() < 1e-15);
        let h = best_approx(Phase::HALF, 1.0);
        assert_eq!((h.a, h.q, h.err), (0, 1, 0.5));
    }

    #[test]
    fn phi_and_divisors() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(24), 8);
        assert_eq!(euler_phi(24), (1..=24u128).filter(|&r| gcd(r, 24) == 1).count() as u64);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(1), vec![1]);
        assert_eq!(factorize(360), vec![(2, 3), (3, 2), (5, 1)]);
    }

    proptest! {
        #[test]
        fn dirichlet_guarantee(x in 0.0f64..1.0, which in 0usize..3) {
            let limit = [10.0, 1e3, 1e6][which];
            let r = best_approx(Phase::from_f64(x), limit);
            prop_assert!(r.q as f64 <= limit);
            prop_assert!(r.err <= 1.0 / limit);
            prop_assert_eq!(gcd(r.a, r.q), 1);
            prop_assert!(r.err <= 0.5);
        }
    }
}
