//! Singular series, local solubility and the singular integral.
//!
//! `B(n, q) = sum_{(a,q)=1} S(q,a)^s e(-na/q)` is multiplicative in `q`, so it
//! is tabulated once per prime power for every residue of `n` (two FFTs per
//! table) and assembled from the factorisation of `q`.

use std::collections::BTreeMap;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::arith::{euler_phi, factorize, gamma, gcd};
use crate::error::{Error, Result};
use crate::expsum::{power_range, unit_power_histogram, vstar_weight};
use crate::phase::Phase;
use crate::quadrature::panel_nodes;
use crate::scalar::{kahan_real, Real};

pub const DEFAULT_Q_CUT: u64 = 10_000;
pub const TAIL_CONSTANT: f64 = 2.0;
pub const SOLUBILITY_MAX_MODULUS: u64 = 1_000_000;
pub const INTEGRAL_CELL_BUDGET: u128 = 1_000_000_000;

/// Complex `B(r, q)` for every residue `r mod q`.
fn b_table_complex(q: u64, s: u32, k: u32) -> Vec<Complex<f64>> {
    let n = q as usize;
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = unit_power_histogram(q, k).into_iter().map(|c| Complex::new(c as f64, 0.0)).collect();
    // S(q, a) = sum_j c_j e(a j / q)
    planner.plan_fft_inverse(n).process(&mut buf);
    for (a, z) in buf.iter_mut().enumerate() {
        *z = if gcd(a as u128, q as u128) == 1 { z.powu(s) } else { Complex::new(0.0, 0.0) };
    }
    planner.plan_fft_forward(n).process(&mut buf);
    buf
}

/// Real table of `B(r, q)`, after checking the imaginary parts vanish.
fn b_table(q: u64, s: u32, k: u32) -> Vec<f64> {
    let scale = (euler_phi(q) as f64).powi(s as i32 + 1);
    b_table_complex(q, s, k)
        .into_iter()
        .map(|z| {
            debug_assert!(z.im.abs() <= 1e-9 * z.re.abs().max(scale * 1e-6), "B not real: {z}");
            z.re
        })
        .collect()
}

/// Cache of prime-power tables for fixed `(s, k)`.
pub struct SeriesTables {
    pub s: u32,
    pub k: u32,
    tables: BTreeMap<u64, Vec<f64>>,
}

impl SeriesTables {
    pub fn new(s: u32, k: u32) -> Self {
        Self { s, k, tables: BTreeMap::new() }
    }

    fn table(&mut self, pe: u64) -> &Vec<f64> {
        let (s, k) = (self.s, self.k);
        self.tables.entry(pe).or_insert_with(|| b_table(pe, s, k))
    }

    /// `B(n, q)` by multiplicativity.
    pub fn b(&mut self, n: u128, q: u64) -> f64 {
        let mut v = 1.0;
        for (p, e) in factorize(q) {
            let pe = p.pow(e);
            v *= self.table(pe)[(n % pe as u128) as usize];
            if v == 0.0 {
                break;
            }
        }
        v
    }

    /// Prefill every prime power up to `q_cut` (parallel).
    pub fn prefill(&mut self, q_cut: u64) {
        let mut pes = Vec::new();
        for p in crate::primewindow::simple_sieve(q_cut) {
            let mut pe = p;
            while pe <= q_cut {
                if !self.tables.contains_key(&pe) {
                    pes.push(pe);
                }
                pe = match pe.checked_mul(p) {
                    Some(v) => v,
                    None => break,
                };
            }
        }
        let (s, k) = (self.s, self.k);
        let built: Vec<(u64, Vec<f64>)> = pes.into_par_iter().map(|pe| (pe, b_table(pe, s, k))).collect();
        self.tables.extend(built);
    }
}

/// `B(n, q)` for a single modulus.
#[allow(non_snake_case)]
pub fn B_coeff(n: u128, q: u64, s: u32, k: u32) -> Result<f64> {
    if q < 1 {
        return Err(Error::input("modulus q must be positive"));
    }
    Ok(SeriesTables::new(s, k).b(n, q))
}

#[derive(Clone, Debug, Serialize)]
pub struct PerQ {
    pub q: u64,
    pub b: f64,
    pub term: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularSeriesResult {
    pub n: u128,
    pub s: u32,
    pub k: u32,
    pub q_cut: u64,
    pub partial: f64,
    pub tail_estimate: f64,
    pub positive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_q: Option<Vec<PerQ>>,
}

/// `2 sum_{q > q_cut} q^{1 + s eps - s/2}` by the integral comparison.
pub fn tail_estimate(s: u32, q_cut: u64, epsilon: f64) -> f64 {
    let sf = s as f64;
    let decay = sf / 2.0 - 2.0 - sf * epsilon;
    if decay <= 0.0 {
        return f64::INFINITY;
    }
    TAIL_CONSTANT * (q_cut as f64).powf(-decay) / decay
}

fn check_series_inputs(s: u32, k: u32, q_cut: u64) -> Result<()> {
    if k < 2 {
        return Err(Error::input("singular series needs k >= 2"));
    }
    if s < 1 {
        return Err(Error::input("s must be positive"));
    }
    if q_cut < 1 {
        return Err(Error::input("q_cut must be at least 1"));
    }
    if s < 5 {
        log::warn!("s = {s} < 5: the truncated series is not known to converge");
    }
    Ok(())
}

pub fn singular_series(n: u128, s: u32, k: u32, q_cut: u64) -> Result<SingularSeriesResult> {
    let mut tables = SeriesTables::new(s, k);
    singular_series_with(&mut tables, n, q_cut, crate::arith::DEFAULT_EPSILON, false)
}

/// Truncated series using shared tables; `per_q` keeps every nonzero term.
pub fn singular_series_with(
    tables: &mut SeriesTables,
    n: u128,
    q_cut: u64,
    epsilon: f64,
    per_q: bool,
) -> Result<SingularSeriesResult> {
    let (s, k) = (tables.s, tables.k);
    check_series_inputs(s, k, q_cut)?;
    tables.prefill(q_cut);
    let mut rows = Vec::new();
    let mut terms = Vec::with_capacity(q_cut as usize);
    for q in 1..=q_cut {
        let b = tables.b(n, q);
        if b == 0.0 {
            continue;
        }
        let term = b / (euler_phi(q) as f64).powi(s as i32);
        terms.push(term);
        if per_q {
            rows.push(PerQ { q, b, term });
        }
    }
    let partial = kahan_real(terms);
    let tail = tail_estimate(s, q_cut, epsilon);
    Ok(SingularSeriesResult {
        n,
        s,
        k,
        q_cut,
        partial,
        tail_estimate: tail,
        positive: partial - tail > 0.0,
        per_q: per_q.then_some(rows),
    })
}

/// `sum_{e=0}^{depth} phi(p^e)^{-s} B(n, p^e)`.
pub fn euler_factor(tables: &mut SeriesTables, n: u128, p: u64, depth: u32) -> f64 {
    let s = tables.s;
    let mut terms = vec![1.0];
    let mut pe = 1u64;
    for _ in 0..depth {
        pe *= p;
        terms.push(tables.b(n, pe) / (euler_phi(pe) as f64).powi(s as i32));
    }
    kahan_real(terms)
}

/// Euler factor at `p` to depth `gamma(k, p) + 2`.
pub fn grouped_euler_factor(tables: &mut SeriesTables, n: u128, p: u64) -> f64 {
    let depth = gamma(tables.k, p) + 2;
    euler_factor(tables, n, p, depth)
}

/// Is `x_1^k + ... + x_s^k = n (mod m)` soluble with every `x_i` a unit mod `m`?
pub fn local_solubility(n: u128, s: u32, k: u32, modulus: u64) -> Result<bool> {
    if modulus < 2 {
        return Err(Error::input("modulus must be at least 2"));
    }
    if modulus > SOLUBILITY_MAX_MODULUS {
        return Err(Error::budget(format!("modulus {modulus} exceeds {SOLUBILITY_MAX_MODULUS}")));
    }
    let m = modulus as usize;
    let powers: Vec<usize> = unit_power_histogram(modulus, k)
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(j, _)| j)
        .collect();
    let mut reach = vec![false; m];
    reach[0] = true;
    for _ in 0..s {
        let mut next = vec![false; m];
        for (x, _) in reach.iter().enumerate().filter(|(_, &r)| r) {
            for &r in &powers {
                next[(x + r) % m] = true;
            }
        }
        reach = next;
    }
    Ok(reach[(n % modulus as u128) as usize])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegralMethod {
    Quadrature,
    ExactCount,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularIntegralResult {
    pub n: u128,
    pub value: f64,
    pub method: IntegralMethod,
    /// `value / (Y^{s-1} X^{1-k})`.
    pub normalized: f64,
}

fn normalizer(s: u32, k: u32, x: f64, y: f64) -> f64 {
    y.powi(s as i32 - 1) * x.powi(1 - k as i32)
}

pub fn singular_integral(n: u128, s: u32, k: u32, x: f64, y: f64, method: IntegralMethod) -> Result<SingularIntegralResult> {
    Ok(singular_integral_batch(&[n], s, k, x, y, method)?.remove(0))
}

/// Singular integral for several `n`, sharing the expensive work.
pub fn singular_integral_batch(
    ns: &[u128],
    s: u32,
    k: u32,
    x: f64,
    y: f64,
    method: IntegralMethod,
) -> Result<Vec<SingularIntegralResult>> {
    if s < 1 || k < 1 {
        return Err(Error::input("s and k must be positive"));
    }
    if ns.is_empty() {
        return Ok(Vec::new());
    }
    let (m1, m2) = power_range(x - y, x + y, k)?;
    if m2.checked_mul(s as u128).is_none() {
        return Err(Error::Overflow("s (X+Y)^k exceeds 128 bits".into()));
    }
    let values = match method {
        IntegralMethod::ExactCount => exact_count(ns, s, k, m1, m2)?,
        IntegralMethod::Quadrature => quadrature(ns, s, k, x, y, m1, m2)?,
    };
    let norm = normalizer(s, k, x, y);
    Ok(ns
        .iter()
        .zip(values)
        .map(|(&n, value)| SingularIntegralResult { n, value, method, normalized: value / norm })
        .collect())
}

fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fa.resize(size, Complex::default());
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fb.resize(size, Complex::default());
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (u, v) in fa.iter_mut().zip(&fb) {
        *u *= v;
    }
    inv.process(&mut fa);
    fa.truncate(len);
    fa.into_iter().map(|z| z.re / size as f64).collect()
}

/// Banded `s`-fold convolution of the weights `g(m)` on `[m1, m2]`.
fn exact_count(ns: &[u128], s: u32, k: u32, m1: u128, m2: u128) -> Result<Vec<f64>> {
    let n_lo = *ns.iter().min().unwrap();
    let n_hi = *ns.iter().max().unwrap();
    let base: Vec<f64> = (m1..=m2).map(|m| vstar_weight(m, k)).collect();
    let (sm1, sm2) = (m1 * s as u128, m2 * s as u128);
    if n_hi < sm1 || n_lo > sm2 {
        return Ok(vec![0.0; ns.len()]);
    }
    let mut budget = INTEGRAL_CELL_BUDGET;
    // cur[i] is the weight of the j-fold sum j*m1 + offset + i.
    let mut cur = vec![1.0f64];
    let mut offset: u128 = 0;
    for j in 1..=s as u128 {
        let cells = ((cur.len() + base.len()) as u128).next_power_of_two();
        if cells > budget {
            return Err(Error::budget(format!(
                "singular integral convolution needs more than {INTEGRAL_CELL_BUDGET} cells; shrink X or Y"
            )));
        }
        budget -= cells;
        let full = fft_convolve(&cur, &base);
        // Keep sums from which the remaining s - j terms can still reach [n_lo, n_hi].
        let rest = s as u128 - j;
        let lo_val = n_lo.saturating_sub(rest * m2).max(j * m1);
        let hi_val = n_hi.saturating_sub(rest * m1).min(j * m1 + offset + full.len() as u128 - 1);
        if hi_val < lo_val {
            return Ok(vec![0.0; ns.len()]);
        }
        let lo_idx = (lo_val - j * m1).max(offset) - offset;
        let hi_idx = hi_val - j * m1 - offset;
        cur = full[lo_idx as usize..=hi_idx as usize].to_vec();
        offset += lo_idx;
    }
    Ok(ns
        .iter()
        .map(|&n| {
            if n < sm1 || n > sm2 {
                return 0.0;
            }
            let start = s as u128 * m1 + offset;
            if n < start || n - start >= cur.len() as u128 {
                0.0
            } else {
                cur[(n - start) as usize].max(0.0)
            }
        })
        .collect())
}

/// Panel edges on `[0, 1/2]`: fine uniform panels over the main lobe, then
/// geometric widening.
pub fn quadrature_edges(s: u32, k: u32, x: f64, y: f64) -> Vec<f64> {
    let scale = x.powi(k as i32 - 1) * y;
    let sub = ((s * k) as f64 / 8.0).ceil().max(1.0);
    let h = 1.0 / (8.0 * scale * sub);
    let inner = (64.0 / scale).min(0.5);
    let mut edges = vec![0.0];
    let count = (inner / h).ceil() as usize;
    for i in 1..=count {
        edges.push((i as f64 * h).min(inner));
    }
    let mut width = h;
    let mut t = *edges.last().unwrap();
    while t < 0.5 {
        width *= 1.25;
        t = (t + width).min(0.5);
        edges.push(t);
    }
    edges.dedup();
    edges
}

const CHUNK: u128 = 4096;

/// `V*(lambda)` from precomputed weights, by chunked rotation.
fn vstar_fast(weights: &[f64], m1: u128, lambda: Phase) -> Complex<f64> {
    let step = f64::unit(lambda.signed_f64());
    let mut sums = Vec::with_capacity(weights.len() / CHUNK as usize + 1);
    for (c, chunk) in weights.chunks(CHUNK as usize).enumerate() {
        let m0 = m1 + c as u128 * CHUNK;
        let mut z = f64::unit(lambda.mul_int(m0).signed_f64());
        let mut acc = Complex::new(0.0, 0.0);
        for &w in chunk {
            acc += z * w;
            z *= step;
        }
        sums.push(acc);
    }
    let mut total = crate::scalar::KahanSum::new();
    for z in sums {
        total.add(z);
    }
    total.value()
}

fn quadrature(ns: &[u128], s: u32, k: u32, x: f64, y: f64, m1: u128, m2: u128) -> Result<Vec<f64>> {
    let edges = quadrature_edges(s, k, x, y);
    let nodes = panel_nodes(&edges);
    let terms = m2 - m1 + 1;
    let work = terms.saturating_mul(nodes.len() as u128);
    if work > 100_000_000_000 {
        return Err(Error::budget(format!("quadrature needs {work} term evaluations; shrink X or Y")));
    }
    let weights: Vec<f64> = (m1..=m2).map(|m| vstar_weight(m, k)).collect();
    let powered: Vec<(f64, f64, Complex<f64>)> = nodes
        .par_iter()
        .map(|&(t, w)| (t, w, vstar_fast(&weights, m1, Phase::from_f64(t)).powu(s)))
        .collect();
    Ok(ns
        .iter()
        .map(|&n| {
            let parts = powered.iter().map(|&(t, w, v)| {
                let e = f64::unit(-Phase::from_f64(t).mul_int(n).signed_f64());
                w * (v * e).re
            });
            2.0 * kahan_real(parts)
        })
        .collect())
}
