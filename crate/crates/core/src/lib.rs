//! Desk-scale workbench for the circle method applied to sums of `k`-th powers
//! of primes lying in a short interval `|p - X| <= Y`.
//!
//! The crate evaluates the exponential sums that drive the method, builds the
//! major/minor arc dissection, computes singular series and singular integrals,
//! counts representations exactly, and compares measured quantities against
//! the analytic bound envelopes.
//!
//! Real-valued arithmetic is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what every count and
//! acceptance check uses.

pub mod arith;
pub mod bounds;
pub mod counting;
pub mod dissection;
pub mod distribution;
mod error;
pub mod expsum;
pub mod phase;
pub mod primewindow;
pub mod quadrature;
pub mod scalar;
pub mod singular;

pub use arith::{best_approx, compute_r, derive_params, divisors, euler_phi, ProblemParams, RationalApprox};
pub use error::{Error, Result};
pub use phase::{Alpha, Phase};
pub use primewindow::{lambda_window, sieve_window, PrimeWindow};
pub use scalar::{KahanSum, Real};

/// Exponential sum value in double precision.
pub type ExpSumValue = expsum::ExpSum<f64>;
/// Exponential sum value in single precision.
pub type ExpSumValue32 = expsum::ExpSum<f32>;
/// Compensated complex accumulator in double precision.
pub type Kahan64 = KahanSum<f64>;
