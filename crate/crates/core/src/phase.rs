//! Fixed-point representation of frequencies modulo one.
//!
//! A [`Phase`] stores `alpha mod 1` as a 128-bit binary fraction. Reducing
//! `n * alpha mod 1` for an exact integer `n` is then a single wrapping
//! multiply, so the phase of `p^k alpha` stays exact no matter how large
//! `p^k` is. Double-precision products would lose every fractional bit once
//! `p^k` exceeds `2^53`.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

const TWO_128: f64 = 340_282_366_920_938_463_463_374_607_431_768_211_456.0;

/// `alpha mod 1` in units of `2^-128`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Phase(pub u128);

impl Phase {
    pub const ZERO: Phase = Phase(0);
    pub const HALF: Phase = Phase(1 << 127);

    /// Exact reduction of a double modulo one (exact whenever `x >= 2^-75`).
    pub fn from_f64(x: f64) -> Phase {
        if !x.is_finite() || x == 0.0 {
            return Phase::ZERO;
        }
        let (mantissa, exponent, sign) = Float::integer_decode(x);
        let shift = exponent as i32 + 128;
        let raw = if shift >= 128 {
            0
        } else if shift >= 0 {
            (mantissa as u128) << shift
        } else if shift > -64 {
            let s = (-shift) as u32;
            let m = mantissa as u128;
            (m + (1u128 << (s - 1))) >> s
        } else {
            0
        };
        let p = Phase(raw);
        if sign < 0 {
            p.neg()
        } else {
            p
        }
    }

    /// Nearest fixed-point value to `a / q` modulo one.
    pub fn from_ratio(a: i128, q: u128) -> Phase {
        assert!(q > 0, "denominator must be positive");
        let r = a.rem_euclid(q as i128) as u128;
        // Long division of r * 2^128 by q.
        let mut rem = r;
        let mut quot = 0u128;
        for _ in 0..128 {
            let carry = rem >> 127;
            rem <<= 1;
            quot <<= 1;
            if carry == 1 || rem >= q {
                rem = rem.wrapping_sub(q);
                quot |= 1;
            }
        }
        if rem >= q - rem {
            quot = quot.wrapping_add(1);
        }
        Phase(quot)
    }

    #[inline]
    pub fn mul_int(self, n: u128) -> Phase {
        Phase(self.0.wrapping_mul(n))
    }

    #[inline]
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Phase) -> Phase {
        Phase(self.0.wrapping_add(other.0))
    }

    #[inline]
    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Phase {
        Phase(self.0.wrapping_neg())
    }

    /// Value in `[0, 1)`.
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / TWO_128
    }

    /// Representative in `[-1/2, 1/2)`.
    #[inline]
    pub fn signed_f64(self) -> f64 {
        (self.0 as i128) as f64 / TWO_128
    }

    /// Distance to the nearest integer.
    pub fn dist_to_int(self) -> f64 {
        self.signed_f64().abs()
    }
}

/// A frequency at which exponential sums are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alpha {
    /// 128-bit fixed point, used for arbitrary reals.
    Fixed(Phase),
    /// Exact `a / q` with `0 <= a < q < 2^64`; phases are computed as residues.
    Rational { a: u128, q: u128 },
}

impl Alpha {
    pub fn from_f64(x: f64) -> Alpha {
        Alpha::Fixed(Phase::from_f64(x))
    }

    pub fn ratio(a: i128, q: u128) -> Alpha {
        assert!(q > 0, "denominator must be positive");
        if q < (1u128 << 64) {
            let a = a.rem_euclid(q as i128) as u128;
            Alpha::Rational { a, q }
        } else {
            Alpha::Fixed(Phase::from_ratio(a, q))
        }
    }

    pub fn phase(self) -> Phase {
        match self {
            Alpha::Fixed(p) => p,
            Alpha::Rational { a, q } => Phase::from_ratio(a as i128, q),
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Alpha::Fixed(p) => p.to_f64(),
            Alpha::Rational { a, q } => a as f64 / q as f64,
        }
    }

    /// `n * alpha mod 1` as a signed fraction in `[-1/2, 1/2]`.
    #[inline]
    pub fn frac_of<T: Real>(self, n: u128) -> T {
        match self {
            Alpha::Fixed(p) => T::of(p.mul_int(n).signed_f64()),
            Alpha::Rational { a, q } => {
                let j = ((n % q) * a) % q;
                let j = if 2 * j >= q { j as i128 - q as i128 } else { j as i128 };
                T::of(j as f64) / T::of(q as f64)
            }
        }
    }

    /// `1 - alpha`.
    pub fn conj(self) -> Alpha {
        match self {
            Alpha::Fixed(p) => Alpha::Fixed(p.neg()),
            Alpha::Rational { a, q } => Alpha::Rational { a: (q - a) % q, q },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trip() {
        for x in [0.0, 0.5, 0.25, 0.1, 0.999_999, 1.0 / 3.0] {
            assert_eq!(Phase::from_f64(x).to_f64(), x);
        }
        assert_eq!(Phase::from_f64(1.25), Phase::from_f64(0.25));
        assert_eq!(Phase::from_f64(-0.25), Phase::from_f64(0.75));
    }

    #[test]
    fn ratio_is_nearest() {
        let third = Phase::from_ratio(1, 3);
        assert_eq!(third.mul_int(3).0.min(third.mul_int(3).0.wrapping_neg()), 1);
        assert_eq!(Phase::from_ratio(1, 2), Phase::HALF);
        assert_eq!(Phase::from_ratio(-1, 4), Phase::from_f64(0.75));
    }

    #[test]
    fn huge_multiplier_stays_exact() {
        // alpha = 2^-100, n = 2^99 + 1: n*alpha = 1/2 + 2^-100.
        let a = Phase(1 << 28);
        let n = (1u128 << 99) + 1;
        assert_eq!(a.mul_int(n).0, (1u128 << 127) + (1 << 28));
    }

    #[test]
    fn rational_residues() {
        let a = Alpha::ratio(1, 3);
        let t: f64 = a.frac_of(5); // 5/3 -> -1/3
        assert!((t + 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(Alpha::ratio(-1, 3), Alpha::Rational { a: 2, q: 3 });
    }
}
