//! Bound envelopes for the exponential sums and mean values, each paired with
//! the exact quantity it bounds. Implicit constants are never asserted here;
//! reports carry `measured / bound` so ladders can check boundedness.

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{gcd, t_k, ProblemParams, RationalApprox};
use crate::counting::{integer_mean_value, mean_value_I, vinogradov_J};
use crate::dissection::{classify, ArcLabel};
use crate::error::{Error, Result};
use crate::expsum::{f_sum, lambda_sum};
use crate::phase::{Alpha, Phase};
use crate::primewindow::{window_bounds, PrimeWindow};
use crate::scalar::{KahanSum, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EnvelopeName {
    #[serde(rename = "prop23")]
    Prop23,
    #[serde(rename = "lemma42")]
    Lemma42,
    #[serde(rename = "tang_a1")]
    TangA1,
    #[serde(rename = "llz_a2")]
    LlzA2,
    #[serde(rename = "daemen31")]
    Daemen31,
    #[serde(rename = "prop22")]
    Prop22,
}

impl std::str::FromStr for EnvelopeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "prop23" => EnvelopeName::Prop23,
            "lemma42" => EnvelopeName::Lemma42,
            "tang_a1" => EnvelopeName::TangA1,
            "llz_a2" => EnvelopeName::LlzA2,
            "daemen31" => EnvelopeName::Daemen31,
            "prop22" => EnvelopeName::Prop22,
            other => return Err(Error::input(format!("unknown envelope {other}"))),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub name: EnvelopeName,
    pub inputs: BTreeMap<String, f64>,
    pub bound_value: f64,
    pub measured: f64,
    pub ratio: f64,
}

impl EnvelopeReport {
    fn new(name: EnvelopeName, inputs: &[(&str, f64)], bound_value: f64, measured: f64) -> Self {
        EnvelopeReport {
            name,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            bound_value,
            measured,
            ratio: measured / bound_value,
        }
    }
}

/// `X^eps Y (1/Xi + X^{-1/2} + Xi Y^{-2} X^{2-k})^{1/K}`, with
/// `Xi = q + Y^2 X^{k-2} |q alpha - a|`.
pub fn prop23_bound<T: Real>(x: T, y: T, k: u32, big_k: u32, eps: T, q: T, dist: T) -> T {
    let xi = q + y * y * x.powi(k as i32 - 2) * dist;
    x.powf(eps) * y * (xi.recip() + x.sqrt().recip() + xi / (y * y) * x.powi(2 - k as i32)).powf(T::of(big_k as f64).recip())
}

/// `X^eps Y (1/q + X^{-1/2} + q Y^{-2} X^{2-k})^{1/K}`.
pub fn lemma42_bound<T: Real>(x: T, y: T, k: u32, big_k: u32, eps: T, q: T) -> T {
    x.powf(eps) * y * (q.recip() + x.sqrt().recip() + q / (y * y) * x.powi(2 - k as i32)).powf(T::of(big_k as f64).recip())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeylVariant {
    Prop23,
    Lemma42,
}

/// Weyl-type envelope for `f(alpha)` at the approximation `a/q`.
pub fn weyl_envelope(params: &ProblemParams, approx: &RationalApprox, variant: WeylVariant) -> f64 {
    if gcd(approx.a, approx.q) != 1 {
        log::warn!("approximation {}/{} is not reduced", approx.a, approx.q);
    }
    if approx.err * approx.q as f64 > 1.0 {
        log::warn!("|alpha - a/q| exceeds q^-2 for q = {}", approx.q);
    }
    let q = approx.q as f64;
    match variant {
        WeylVariant::Prop23 => prop23_bound(params.x, params.y, params.k, params.big_k, params.epsilon, q, approx.err),
        WeylVariant::Lemma42 => lemma42_bound(params.x, params.y, params.k, params.big_k, params.epsilon, q),
    }
}

/// The five bracket terms of the Tang bound for the sum over `[x, x + y]`.
pub fn tang_terms(x: f64, y: f64, k: u32, q: f64) -> [f64; 5] {
    let w = 2f64.powi(k as i32 - 1);
    let kf = k as f64;
    [
        1.0 / q,
        x.sqrt() / y,
        x.powf(w * w / (w + 1.0)) / y.powf(w),
        x.powf(((kf - 1.0) * (w + 1.0) - 1.0) / (w + 1.0)) / y.powf(2.0 * kf - 2.0),
        q * x.powf(kf - 1.0) / y.powf(2.0 * kf - 1.0),
    ]
}

/// Largest `q` allowed by the Tang lemma.
pub fn tang_q_limit(x: f64, y: f64, k: u32) -> f64 {
    let w = 2f64.powi(k as i32 - 1);
    let kf = k as f64;
    x.powf((kf - 1.0) / (w - 1.0)) * y.powf((kf * (w - 2.0) + 1.0) / (w - 1.0))
}

/// `y^{1+eps} (sum of the five terms)^{1/omega^2}`, `omega = 2^{k-1}`.
pub fn tang_envelope(x: f64, y: f64, k: u32, approx: &RationalApprox, eps: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::input("Tang bound: needs k >= 2"));
    }
    if !(y > x.sqrt()) {
        return Err(Error::input(format!("Tang bound: needs y > x^(1/2), got y = {y}, x = {x}")));
    }
    let q = approx.q as f64;
    let limit = tang_q_limit(x, y, k);
    if !(q >= 1.0 && q <= limit) {
        return Err(Error::input(format!("Tang bound: needs 1 <= q <= {limit}, got q = {q}")));
    }
    if approx.err > 1.0 / q {
        return Err(Error::input("Tang bound: needs |alpha - a/q| <= q^-2"));
    }
    let w = 2f64.powi(k as i32 - 1);
    let bracket: f64 = tang_terms(x, y, k, q).iter().sum();
    Ok(y.powf(1.0 + eps) * bracket.powf(1.0 / (w * w)))
}

/// The five terms of the Liu–Lü–Zhan bound (without the `(qx)^eps` factor).
pub fn llz_terms(x: f64, y: f64, k: u32, approx: &RationalApprox) -> [f64; 5] {
    let q = approx.q as f64;
    let xi = x.powi(k as i32) * (approx.err / q) + x * x / (y * y);
    [
        y * (q * xi).sqrt() / x.sqrt(),
        (q * x).sqrt() * xi.powf(1.0 / 6.0),
        y.sqrt() * x.powf(0.3),
        x.powf(0.8) / xi.powf(1.0 / 6.0),
        x / (q * xi).sqrt(),
    ]
}

/// `(qx)^eps` times the five-term sum, with `Xi = x^k |alpha - a/q| + x^2 y^{-2}`.
pub fn llz_envelope(x: f64, y: f64, k: u32, approx: &RationalApprox, eps: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::input("LLZ bound: needs k >= 1"));
    }
    if !(2.0 <= y && y <= x) {
        return Err(Error::input(format!("LLZ bound: needs 2 <= y <= x, got y = {y}, x = {x}")));
    }
    if approx.q < 1 || gcd(approx.a, approx.q) != 1 {
        return Err(Error::input("LLZ bound: needs (a, q) = 1"));
    }
    let q = approx.q as f64;
    Ok((q * x).powf(eps) * llz_terms(x, y, k, approx).iter().sum::<f64>())
}

/// Exact `int |F|^{2t}` over the integers of the window against
/// `(1 + Y^2/X) X^{2-k} Y^{k(k+1)/2 - 3} J_{t,k}(Y)`.
pub fn daemen_check(t: u32, k: u32, x: f64, y: f64) -> Result<EnvelopeReport> {
    if !(x.cbrt() <= y && y <= x) {
        return Err(Error::input(format!("need X^(1/3) <= Y <= X, got X = {x}, Y = {y}")));
    }
    let (lo, hi) = window_bounds(x, y)?;
    let measured = integer_mean_value(t, k, lo.max(1), hi)?.value;
    let j = vinogradov_J(t, k, y.floor() as u64)?.value;
    let kf = k as f64;
    let bound = (1.0 + y * y / x) * x.powf(2.0 - kf) * y.powf(kf * (kf + 1.0) / 2.0 - 3.0) * j;
    Ok(EnvelopeReport::new(
        EnvelopeName::Daemen31,
        &[("t", t as f64), ("k", kf), ("X", x), ("Y", y), ("J", j)],
        bound,
        measured,
    ))
}

/// Exact `I(s/2)` against `Y^{s-1} X^{1-k+eps}`.
pub fn prop22_check(s: u32, params: &ProblemParams, w: &PrimeWindow) -> Result<EnvelopeReport> {
    if s % 2 == 1 || s == 0 {
        return Err(Error::input("prop22 check needs an even s (exact even moments only)"));
    }
    let k = params.k;
    if s < 2 * t_k(k) {
        log::warn!("s = {s} is below 2 t_k = {}", 2 * t_k(k));
    }
    if params.y < params.x.sqrt() {
        log::warn!("Y < X^(1/2)");
    }
    let measured = mean_value_I(s / 2, k, w)?.value;
    let bound = params.y.powi(s as i32 - 1) * params.x.powf(1.0 - k as f64 + params.epsilon);
    Ok(EnvelopeReport::new(
        EnvelopeName::Prop22,
        &[("s", s as f64), ("k", k as f64), ("X", params.x), ("Y", params.y), ("epsilon", params.epsilon)],
        bound,
        measured,
    ))
}

/// Moebius function and von Mangoldt function on `0..=n`.
pub fn mobius_mangoldt(n: usize) -> (Vec<i8>, Vec<f64>) {
    let mut spf = vec![0u32; n + 1];
    let mut primes = Vec::new();
    let mut mu = vec![0i8; n + 1];
    let mut lam = vec![0.0f64; n + 1];
    if n >= 1 {
        mu[1] = 1;
    }
    for i in 2..=n {
        if spf[i] == 0 {
            spf[i] = i as u32;
            primes.push(i as u32);
            mu[i] = -1;
        }
        for &p in &primes {
            let m = i * p as usize;
            if p > spf[i] || m > n {
                break;
            }
            spf[m] = p;
            mu[m] = if p == spf[i] { 0 } else { -mu[i] };
        }
    }
    for &p in &primes {
        let lp = (p as f64).ln();
        let mut q = p as usize;
        loop {
            lam[q] = lp;
            match q.checked_mul(p as usize) {
                Some(v) if v <= n => q = v,
                _ => break,
            }
        }
    }
    (mu, lam)
}

#[derive(Clone, Debug, Serialize)]
pub struct VaughanReport {
    pub lo: u64,
    pub hi: u64,
    pub u: f64,
    pub v: f64,
    pub s1: [f64; 2],
    pub s2: [f64; 2],
    pub s3: [f64; 2],
    pub direct: [f64; 2],
    pub residual: f64,
    /// Sum of absolute values of every term entering `S1`, `S2`, `S3`.
    pub scale: f64,
    pub relative: f64,
}

fn exp_sum_of(coeffs: &[f64], lo: u64, k: u32, alpha: Alpha) -> Result<Complex<f64>> {
    let terms: Vec<(u64, f64)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(i, &c)| (lo + i as u64, c))
        .collect();
    if terms.is_empty() {
        return Ok(Complex::new(0.0, 0.0));
    }
    Ok(lambda_sum::<f64>(&terms, k, alpha)?.value())
}

/// Vaughan's identity over the integers `n` in `[lo, hi]`, all `n > U`:
/// `Lambda(n) = sum_{md=n, d<=V} mu(d) log m - sum_{lmd=n, d<=V, m<=U} mu(d) Lambda(m)
///            - sum_{mu=n, m>U, u>V} Lambda(m) lambda_1(u)`,
/// with `lambda_1(u) = sum_{d|u, d<=V} mu(d)`. Each piece is weighted by `e(n^k alpha)`.
pub fn vaughan_decompose(lo: u64, hi: u64, k: u32, alpha: Alpha, u: f64, v: f64) -> Result<VaughanReport> {
    if !(u >= 1.0 && v >= 1.0) {
        return Err(Error::input("U and V must be at least 1"));
    }
    if hi < lo || lo == 0 {
        return Err(Error::input("window must be a nonempty range of positive integers"));
    }
    if (lo as f64) <= u {
        return Err(Error::input(format!("identity needs every n > U; lo = {lo}, U = {u}")));
    }
    if hi > 200_000_000 {
        return Err(Error::budget("window end exceeds 2e8"));
    }
    let (uu, vv) = (u.floor() as usize, v.floor() as usize);
    let len = (hi - lo + 1) as usize;
    let (mu, lam) = mobius_mangoldt(hi as usize);
    let mut a1 = vec![0.0; len];
    let mut a2 = vec![0.0; len];
    let mut a3 = vec![0.0; len];
    let mut abs_terms = Vec::new();
    let range = |d: usize| ((lo as usize).div_ceil(d), hi as usize / d);
    // S1: d <= V, m = n/d, coefficient mu(d) log m.
    for d in 1..=vv.min(hi as usize) {
        if mu[d] == 0 {
            continue;
        }
        let (m0, m1) = range(d);
        for m in m0..=m1 {
            let c = mu[d] as f64 * (m as f64).ln();
            a1[m * d - lo as usize] += c;
            abs_terms.push(c.abs());
        }
    }
    // S2: lambda_0(w) = sum_{md=w, d<=V, m<=U} mu(d) Lambda(m), then n = l w.
    let wmax = (uu * vv).min(hi as usize);
    let mut lambda0 = vec![0.0; wmax + 1];
    for d in 1..=vv.min(wmax) {
        if mu[d] == 0 {
            continue;
        }
        for m in 2..=uu.min(wmax / d) {
            if lam[m] != 0.0 {
                lambda0[m * d] += mu[d] as f64 * lam[m];
            }
        }
    }
    for d in 1..=vv.min(wmax) {
        if mu[d] == 0 {
            continue;
        }
        for m in 2..=uu.min(wmax / d) {
            if lam[m] == 0.0 {
                continue;
            }
            let c = mu[d] as f64 * lam[m];
            let (l0, l1) = range(m * d);
            for l in l0..=l1 {
                a2[l * m * d - lo as usize] += c;
                abs_terms.push(c.abs());
            }
        }
    }
    // S3: m > U prime power, u > V, lambda_1(u) by a divisor sieve.
    let umax = (hi as usize) / (uu + 1);
    let mut lambda1 = vec![0i64; umax + 1];
    for d in 1..=vv.min(umax) {
        if mu[d] == 0 {
            continue;
        }
        let mut x = d;
        while x <= umax {
            lambda1[x] += mu[d] as i64;
            x += d;
        }
    }
    for m in (uu + 1)..=(hi as usize) {
        if lam[m] == 0.0 {
            continue;
        }
        let (u0, u1) = range(m);
        for q in u0.max(vv + 1)..=u1 {
            if lambda1[q] != 0 {
                let c = lam[m] * lambda1[q] as f64;
                a3[m * q - lo as usize] += c;
                abs_terms.push(c.abs());
            }
        }
    }
    let s1 = exp_sum_of(&a1, lo, k, alpha)?;
    let s2 = exp_sum_of(&a2, lo, k, alpha)?;
    let s3 = exp_sum_of(&a3, lo, k, alpha)?;
    let support: Vec<(u64, f64)> = (lo..=hi).filter(|&n| lam[n as usize] != 0.0).map(|n| (n, lam[n as usize])).collect();
    let direct = exp_sum_of(&support.iter().fold(vec![0.0; len], |mut acc, &(n, l)| {
        acc[(n - lo) as usize] = l;
        acc
    }), lo, k, alpha)?;
    let combined = s1 - s2 - s3;
    let residual = (direct - combined).norm();
    let scale = crate::scalar::kahan_real(abs_terms).max(f64::MIN_POSITIVE);
    Ok(VaughanReport {
        lo,
        hi,
        u,
        v,
        s1: [s1.re, s1.im],
        s2: [s2.re, s2.im],
        s3: [s3.re, s3.im],
        direct: [direct.re, direct.im],
        residual,
        scale,
        relative: residual / scale,
    })
}

/// Default `U = V = 4 X^{2 - 2 theta}`.
pub fn vaughan_default_uv(params: &ProblemParams) -> f64 {
    4.0 * params.x.powf(2.0 - 2.0 * params.theta)
}

/// Golden-ratio phase, `(sqrt 5 - 1)/2` in 128-bit fixed point.
pub const GOLDEN: Phase = Phase(0x9E37_79B9_7F4A_7C15_F39C_C060_5CED_C834);

/// Starting phase for low-discrepancy sequences, derived from the seed.
pub fn seeded_offset(seed: u64) -> Phase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Phase(rng.random::<u128>())
}

/// `offset + j * golden (mod 1)` for `j = 0, 1, ...`.
pub fn low_discrepancy(offset: Phase, count: usize) -> impl Iterator<Item = Phase> {
    (0..count as u128).map(move |j| offset.add(GOLDEN.mul_int(j)))
}

#[derive(Clone, Debug, Serialize)]
pub struct SurveySample {
    pub alpha: f64,
    pub label: ArcLabel,
    pub a: u128,
    pub q: u128,
    pub measured: f64,
    pub envelope: f64,
    /// `X^{eps - delta} Y`.
    pub minor_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SurveyReport {
    pub samples: usize,
    pub tried: usize,
    pub within_envelope: usize,
    pub within_minor_bound: usize,
    pub fraction_within: f64,
    pub fraction_within_minor: f64,
    pub violations: Vec<SurveySample>,
    pub max_ratio: f64,
    pub rows: Vec<SurveySample>,
}

/// Measure `|f(alpha)|` at the first `samples` minor-arc points of a seeded
/// low-discrepancy sequence and compare with the Weyl envelope.
pub fn minor_arc_survey(params: &ProblemParams, w: &PrimeWindow, samples: usize, seed: u64, variant: WeylVariant) -> Result<SurveyReport> {
    let offset = seeded_offset(seed);
    let cap = samples.saturating_mul(100).max(1000);
    let mut picked = Vec::with_capacity(samples);
    let mut tried = 0;
    for a in low_discrepancy(offset, cap) {
        tried += 1;
        let c = classify(a, params)?;
        if c.label != ArcLabel::Major {
            picked.push((a, c));
            if picked.len() == samples {
                break;
            }
        }
    }
    let minor_bound = params.x.powf(params.epsilon - params.delta) * params.y;
    let rows: Vec<SurveySample> = picked
        .par_iter()
        .map(|(a, c)| {
            let f = f_sum::<f64>(w, params.k, Alpha::Fixed(*a))?;
            Ok(SurveySample {
                alpha: a.to_f64(),
                label: c.label,
                a: c.witness.a,
                q: c.witness.q,
                measured: f.abs(),
                envelope: weyl_envelope(params, &c.witness, variant),
                minor_bound,
            })
        })
        .collect::<Result<_>>()?;
    let within = rows.iter().filter(|r| r.measured <= r.envelope).count();
    let within_minor = rows.iter().filter(|r| r.measured <= r.minor_bound).count();
    let violations: Vec<SurveySample> = rows.iter().filter(|r| r.measured > r.envelope).cloned().collect();
    for v in &violations {
        log::warn!("envelope violated at alpha = {}: |f| = {} > {}", v.alpha, v.measured, v.envelope);
    }
    let n = rows.len().max(1) as f64;
    let max_ratio = rows.iter().map(|r| r.measured / r.envelope).fold(0.0, f64::max);
    Ok(SurveyReport {
        samples: rows.len(),
        tried,
        within_envelope: within,
        within_minor_bound: within_minor,
        fraction_within: within as f64 / n,
        fraction_within_minor: within_minor as f64 / n,
        violations,
        max_ratio,
        rows,
    })
}

/// `sum_n Lambda(n) e(n^k alpha)` accumulated directly, for cross-checks.
pub fn lambda_direct(lo: u64, hi: u64, k: u32, alpha: Alpha) -> Complex<f64> {
    let (_, lam) = mobius_mangoldt(hi as usize);
    let mut acc = KahanSum::<f64>::new();
    for n in lo..=hi {
        let l = lam[n as usize];
        if l != 0.0 {
            let t: f64 = alpha.frac_of((n as u128).pow(k));
            acc.add(f64::unit(t) * l);
        }
    }
    acc.value()
}

/// Uniform pseudo-random phase; used only where reproducible randomness is wanted.
pub fn random_alpha(rng: &mut ChaCha8Rng) -> Alpha {
    Alpha::Fixed(Phase(rng.random::<u128>()))
}
