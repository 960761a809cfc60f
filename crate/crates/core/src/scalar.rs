//! Scalar abstraction for the real-valued parts of the crate.

use std::fmt::Debug;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating scalar used for phases, weights and envelopes.
pub trait Real: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static {
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `e(t) = exp(2 pi i t)`.
    fn unit(t: Self) -> Complex<Self> {
        let (s, c) = (Self::TAU() * t).sin_cos();
        Complex::new(c, s)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Kahan–Babuska compensated sum of complex values, fixed insertion order.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum<T: Real> {
    re: T,
    im: T,
    c_re: T,
    c_im: T,
}

#[inline]
fn neumaier<T: Real>(sum: &mut T, comp: &mut T, x: T) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp = *comp + ((*sum - t) + x);
    } else {
        *comp = *comp + ((x - t) + *sum);
    }
    *sum = t;
}

impl<T: Real> KahanSum<T> {
    pub fn new() -> Self {
        Self { re: T::zero(), im: T::zero(), c_re: T::zero(), c_im: T::zero() }
    }

    #[inline]
    pub fn add(&mut self, z: Complex<T>) {
        neumaier(&mut self.re, &mut self.c_re, z.re);
        neumaier(&mut self.im, &mut self.c_im, z.im);
    }

    #[inline]
    pub fn add_real(&mut self, x: T) {
        neumaier(&mut self.re, &mut self.c_re, x);
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.value());
    }

    pub fn value(&self) -> Complex<T> {
        Complex::new(self.re + self.c_re, self.im + self.c_im)
    }
}

impl<T: Real> FromIterator<Complex<T>> for KahanSum<T> {
    fn from_iter<I: IntoIterator<Item = Complex<T>>>(iter: I) -> Self {
        let mut acc = Self::new();
        for z in iter {
            acc.add(z);
        }
        acc
    }
}

/// Compensated real sum in iteration order.
pub fn kahan_real<T: Real, I: IntoIterator<Item = T>>(iter: I) -> T {
    let mut acc = KahanSum::new();
    for x in iter {
        acc.add_real(x);
    }
    acc.value().re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        let xs: Vec<f64> = std::iter::once(1.0).chain(std::iter::repeat(1e-16).take(10_000)).collect();
        let naive: f64 = xs.iter().sum();
        let comp = kahan_real(xs.iter().copied());
        assert!((comp - (1.0 + 1e-12)).abs() < 1e-15);
        assert!((naive - (1.0 + 1e-12)).abs() > 1e-13);
    }

    #[test]
    fn unit_circle_in_both_precisions() {
        let z = f64::unit(0.25);
        assert!(z.re.abs() < 1e-15 && (z.im - 1.0).abs() < 1e-15);
        let w = f32::unit(0.5);
        assert!((w.re + 1.0).abs() < 1e-6);
    }
}
