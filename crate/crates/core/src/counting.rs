//! Exact representation counts and mean values.
//!
//! Every count uses ordered tuples: `(p1, p2)` and `(p2, p1)` are different
//! solutions, as in nested sums over each variable. Sums of `k`-th powers are
//! kept as 128-bit integers (compressed lattice indices); only the weights are
//! floating point.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::arith::compute_r;
use crate::distribution::{match_sum, Atoms, Dist, DENSE_LIMIT};
use crate::error::{Error, Result};
use crate::expsum::checked_power;
use crate::primewindow::PrimeWindow;
use crate::scalar::kahan_real;

/// Default number of atom-times-entry operations allowed per computation.
pub const DEFAULT_BUDGET: u128 = 4_000_000_000;
/// Enumeration cap for Vinogradov counts.
pub const VINOGRADOV_BUDGET: u128 = 1_000_000_000;
pub const MAX_MOMENT_SET: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CountKind {
    Rho,
    Meanvalue,
    Vinogradov,
    Moment8,
    Exceptional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NStatus {
    Represented,
    Exceptional,
    NotScanned,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerN {
    pub n: u128,
    pub raw: u128,
    pub value: f64,
    pub status: NStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct CountReport {
    pub kind: CountKind,
    pub params: BTreeMap<String, f64>,
    pub value: f64,
    pub raw: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_n: Option<Vec<PerN>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admissible: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exceptional: Option<Vec<u128>>,
}

impl CountReport {
    fn new(kind: CountKind, params: &[(&str, f64)], raw: u128, value: f64) -> Self {
        CountReport {
            kind,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            value,
            raw,
            per_n: None,
            envelope: None,
            ratio: None,
            admissible: None,
            exceptional: None,
        }
    }
}

fn prime_atoms(w: &PrimeWindow, k: u32, arity: u32) -> Result<Atoms> {
    if w.is_empty() {
        return Err(Error::input("prime window is empty"));
    }
    let mut vals = Vec::with_capacity(w.len());
    for (p, lp) in w.iter() {
        vals.push((checked_power(p as u128, k)?, lp));
    }
    let top = vals.last().unwrap().0;
    if top.checked_mul(arity.max(1) as u128).is_none() {
        return Err(Error::Overflow(format!("{arity} * (X+Y)^{k} exceeds 128 bits")));
    }
    Atoms::from_values(&vals)
}

fn window_params(w: &PrimeWindow, k: u32, s: u32) -> Vec<(&'static str, f64)> {
    vec![("k", k as f64), ("s", s as f64), ("X", w.x), ("Y", w.y), ("primes", w.len() as f64)]
}

/// Index band `[lo, hi]` for stage `j` of an `s`-fold sum aimed at targets `[t_lo, t_hi]`.
fn band(t_lo: u128, t_hi: u128, s: u32, j: u32, max_index: u128) -> (u128, u128) {
    let slack = (s - j) as u128 * max_index;
    (t_lo.saturating_sub(slack), t_hi)
}

/// Weighted count of ordered `s`-tuples of window primes with `sum p_i^k = n`.
pub fn rho(n: u128, s: u32, k: u32, w: &PrimeWindow) -> Result<CountReport> {
    rho_with_budget(n, s, k, w, DEFAULT_BUDGET)
}

pub fn rho_with_budget(n: u128, s: u32, k: u32, w: &PrimeWindow, mut budget: u128) -> Result<CountReport> {
    if s < 2 {
        return Err(Error::input("rho needs s >= 2"));
    }
    let atoms = prime_atoms(w, k, s)?;
    let mut params = window_params(w, k, s);
    params.push(("n", n as f64));
    let Some(target) = atoms.index_of(n, s) else {
        return Ok(CountReport::new(CountKind::Rho, &params, 0, 0.0));
    };
    let mx = atoms.max_index();
    if target > s as u128 * mx {
        return Ok(CountReport::new(CountKind::Rho, &params, 0, 0.0));
    }
    let small = s / 2;
    let b = Dist::power(&atoms, small, |j| band(target, target, s, j, mx), &mut budget)?;
    let a = if s % 2 == 0 { b.clone() } else { b.step(&atoms, band(target, target, s, small + 1, mx), &mut budget)? };
    let (raw, value) = match_sum(&a, &b, target);
    Ok(CountReport::new(CountKind::Rho, &params, raw, value))
}

/// `rho(n)` for every `n` in `[n_lo, n_hi]` lying on the sum lattice, from one
/// banded `s`-fold convolution. Entries are ascending in `n`.
pub fn rho_batch(n_lo: u128, n_hi: u128, s: u32, k: u32, w: &PrimeWindow) -> Result<Vec<PerN>> {
    if s < 1 {
        return Err(Error::input("s must be positive"));
    }
    let atoms = prime_atoms(w, k, s)?;
    let offset = atoms.base * s as u128;
    if n_hi < offset || n_hi < n_lo {
        return Ok(Vec::new());
    }
    let j_lo = (n_lo.saturating_sub(offset)).div_ceil(atoms.step);
    let j_hi = (n_hi - offset) / atoms.step;
    let mx = atoms.max_index();
    let mut budget = DEFAULT_BUDGET;
    let d = Dist::power(&atoms, s, |j| band(j_lo, j_hi, s, j, mx), &mut budget)?;
    Ok(d.iter()
        .filter(|e| e.0 >= j_lo && e.0 <= j_hi)
        .map(|(j, c, v)| PerN { n: atoms.value_of(j, s), raw: c, value: v, status: NStatus::Represented })
        .collect())
}

/// Ordered enumeration of all `s`-tuples, the last coordinate found by
/// binary search; the reference for small windows.
pub fn rho_naive(n: u128, s: u32, k: u32, w: &PrimeWindow) -> Result<(u128, f64)> {
    if s < 1 {
        return Err(Error::input("s must be positive"));
    }
    let vals: Vec<(u128, f64)> = w.iter().map(|(p, l)| checked_power(p as u128, k).map(|v| (v, l))).collect::<Result<_>>()?;
    fn go(rest: u128, depth: u32, vals: &[(u128, f64)], weight: f64, raw: &mut u128, total: &mut Vec<f64>) {
        if depth == 1 {
            if let Ok(i) = vals.binary_search_by_key(&rest, |e| e.0) {
                *raw += 1;
                total.push(weight * vals[i].1);
            }
            return;
        }
        for &(v, l) in vals {
            if v > rest {
                break;
            }
            go(rest - v, depth - 1, vals, weight * l, raw, total);
        }
    }
    let mut raw = 0;
    let mut weights = Vec::new();
    go(n, s, &vals, 1.0, &mut raw, &mut weights);
    Ok((raw, kahan_real(weights)))
}

/// Existence of a representation, searching nondecreasing tuples.
pub fn represents_naive(n: u128, s: u32, k: u32, w: &PrimeWindow) -> Result<bool> {
    let vals: Vec<u128> = w.iter().map(|(p, _)| checked_power(p as u128, k)).collect::<Result<_>>()?;
    fn go(rest: u128, depth: u32, from: usize, vals: &[u128]) -> bool {
        if depth == 0 {
            return rest == 0;
        }
        let (lo, hi) = (vals[from], *vals.last().unwrap());
        if rest < lo * depth as u128 || rest > hi * depth as u128 {
            return false;
        }
        (from..vals.len()).any(|i| vals[i] <= rest && go(rest - vals[i], depth - 1, i, vals))
    }
    Ok(!vals.is_empty() && go(n, s, 0, &vals))
}

/// `I(t) = int_0^1 |f(alpha)|^{2t} d alpha` as the weighted count of
/// `p_1^k + ... + p_t^k = p_{t+1}^k + ... + p_{2t}^k`.
#[allow(non_snake_case)]
pub fn mean_value_I(t: u32, k: u32, w: &PrimeWindow) -> Result<CountReport> {
    if t < 1 {
        return Err(Error::input("t must be positive"));
    }
    let atoms = prime_atoms(w, k, t)?;
    let mut budget = DEFAULT_BUDGET;
    let d = Dist::power(&atoms, t, |_| (0, u128::MAX), &mut budget)?;
    let (raw, value) = d.energy();
    let mut params = window_params(w, k, 2 * t);
    params.push(("t", t as f64));
    Ok(CountReport::new(CountKind::Meanvalue, &params, raw, value))
}

/// `int_0^1 |F(alpha)|^{2t}` for the integers `m` in `[lo, hi]` (unit weights).
pub fn integer_mean_value(t: u32, k: u32, lo: u64, hi: u64) -> Result<CountReport> {
    if t < 1 || hi < lo {
        return Err(Error::input("need t >= 1 and a nonempty range"));
    }
    let vals: Vec<(u128, f64)> = (lo..=hi).map(|m| checked_power(m as u128, k).map(|v| (v, 1.0))).collect::<Result<_>>()?;
    let atoms = Atoms::from_values(&vals)?;
    let mut budget = DEFAULT_BUDGET;
    let d = Dist::power(&atoms, t, |_| (0, u128::MAX), &mut budget)?;
    let (raw, _) = d.energy();
    let params = [("t", t as f64), ("k", k as f64), ("lo", lo as f64), ("hi", hi as f64)];
    Ok(CountReport::new(CountKind::Meanvalue, &params, raw, raw as f64))
}

/// `J_{t,k}(X)`: solutions of `sum x_i^j = sum y_i^j` for `1 <= j <= k`, with
/// `1 <= x_i, y_i <= X`.
#[allow(non_snake_case)]
pub fn vinogradov_J(t: u32, k: u32, x: u64) -> Result<CountReport> {
    if t < 1 || k < 1 || x < 1 {
        return Err(Error::input("need t, k, X >= 1"));
    }
    let size = (x as u128).checked_pow(t).unwrap_or(u128::MAX);
    if size > VINOGRADOV_BUDGET {
        return Err(Error::budget(format!("X^t = {size} tuples exceeds {VINOGRADOV_BUDGET}")));
    }
    checked_power(x as u128, k)?;
    // Each nondecreasing t-tuple stands for t!/prod(mult!) ordered tuples.
    let mut keys: Vec<(Vec<u128>, u128)> = Vec::new();
    let mut tuple = vec![1u64; t as usize];
    let fact = |m: usize| (1..=m as u128).product::<u128>();
    loop {
        let key: Vec<u128> = (1..=k).map(|j| tuple.iter().map(|&v| (v as u128).pow(j)).sum()).collect();
        let mut mult = fact(t as usize);
        let mut run = 1;
        for i in 1..tuple.len() {
            if tuple[i] == tuple[i - 1] {
                run += 1;
            } else {
                mult /= fact(run);
                run = 1;
            }
        }
        mult /= fact(run);
        keys.push((key, mult));
        match tuple.iter().rposition(|&v| v < x) {
            Some(i) => {
                let v = tuple[i] + 1;
                tuple[i..].iter_mut().for_each(|e| *e = v);
            }
            None => break,
        }
    }
    keys.sort();
    let mut raw = 0u128;
    let mut idx = 0;
    while idx < keys.len() {
        let mut c = 0u128;
        let mut j = idx;
        while j < keys.len() && keys[j].0 == keys[idx].0 {
            c += keys[j].1;
            j += 1;
        }
        raw += c * c;
        idx = j;
    }
    let params = [("t", t as f64), ("k", k as f64), ("X", x as f64)];
    Ok(CountReport::new(CountKind::Vinogradov, &params, raw, raw as f64))
}

/// `int_0^1 |f(alpha)^4 K(alpha)^2| d alpha` with `K(alpha) = sum_{n in Z} e(n alpha)`,
/// for squares. Counts `p1^2 + p2^2 + n2 = p3^2 + p4^2 + n1` with `n1, n2 in Z`.
pub fn moment8_lhs(w: &PrimeWindow, z: &[u128], epsilon: f64) -> Result<CountReport> {
    let mut z = z.to_vec();
    z.sort_unstable();
    z.dedup();
    if z.is_empty() {
        return Err(Error::input("Z is empty"));
    }
    if z.len() > MAX_MOMENT_SET {
        return Err(Error::input(format!("|Z| = {} exceeds {MAX_MOMENT_SET}", z.len())));
    }
    let atoms = prime_atoms(w, 2, 2)?;
    let mut budget = DEFAULT_BUDGET;
    let d2 = Dist::power(&atoms, 2, |_| (0, u128::MAX), &mut budget)?;
    let cells = d2.len() as u128 * z.len() as u128;
    if cells > budget {
        return Err(Error::budget(format!("moment needs {cells} cells")));
    }
    let step = atoms.step;
    // H(v) = sum_{n in Z} D2(v - n); classes of n mod step never overlap in v.
    let mut classes: BTreeMap<u128, Vec<u128>> = BTreeMap::new();
    for &n in &z {
        classes.entry(n % step).or_default().push(n / step);
    }
    let mut raw = 0u128;
    let mut energy = Vec::new();
    for shifts in classes.values() {
        let lo = shifts[0];
        let hi = *shifts.last().unwrap();
        let (first, last) = (d2.iter().next().unwrap().0, d2.iter().last().unwrap().0);
        let span = last - first + hi - lo + 1;
        if span <= DENSE_LIMIT {
            let mut c = vec![0u128; span as usize];
            let mut wv = vec![0.0f64; span as usize];
            for &sh in shifts {
                for (j, cnt, wt) in d2.iter() {
                    let i = (j - first + sh - lo) as usize;
                    c[i] += cnt;
                    wv[i] += wt;
                }
            }
            raw += c.iter().map(|v| v * v).sum::<u128>();
            energy.extend(wv.iter().map(|v| v * v));
        } else {
            let mut entries: Vec<(u128, u128, f64)> = Vec::new();
            for &sh in shifts {
                entries.extend(d2.iter().map(|(j, cnt, wt)| (j + sh, cnt, wt)));
            }
            entries.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < entries.len() {
                let (mut c, mut wt, mut j) = (0u128, 0.0f64, i);
                while j < entries.len() && entries[j].0 == entries[i].0 {
                    c += entries[j].1;
                    wt += entries[j].2;
                    j += 1;
                }
                raw += c * c;
                energy.push(wt * wt);
                i = j;
            }
        }
    }
    let value = kahan_real(energy);
    let zl = z.len() as f64;
    let envelope = w.x.powf(epsilon) * (w.y.powi(2) * zl + w.y.powi(3) / w.x * zl * zl);
    let mut params = window_params(w, 2, 4);
    params.push(("Z", zl));
    params.push(("epsilon", epsilon));
    let mut r = CountReport::new(CountKind::Moment8, &params, raw, value);
    r.envelope = Some(envelope);
    r.ratio = Some(value / envelope);
    Ok(r)
}

/// `n = s (mod R(k))`, and `9` does not divide `n` for seven cubes.
pub fn is_admissible(n: u128, s: u32, k: u32) -> bool {
    let r = compute_r(k) as u128;
    if n % r != s as u128 % r {
        return false;
    }
    !(k == 3 && s == 7 && n % 9 == 0)
}

pub fn scan_status(n: u128, s: u32, k: u32, w: &PrimeWindow) -> Result<NStatus> {
    if !is_admissible(n, s, k) {
        return Ok(NStatus::NotScanned);
    }
    let r = rho(n, s, k, w)?;
    Ok(if r.raw > 0 { NStatus::Represented } else { NStatus::Exceptional })
}

/// Admissible `n` in `[n0, n0 + width]` with no representation.
pub fn exceptional_scan(n0: u128, width: u128, s: u32, k: u32, w: &PrimeWindow) -> Result<CountReport> {
    let n1 = n0.checked_add(width).ok_or_else(|| Error::input("scan range overflows"))?;
    let counts = rho_batch(n0, n1, s, k, w)?;
    let mut per_n = Vec::new();
    let mut exceptional = Vec::new();
    let mut admissible = 0u64;
    let mut pos = 0;
    for n in n0..=n1 {
        if !is_admissible(n, s, k) {
            continue;
        }
        admissible += 1;
        while pos < counts.len() && counts[pos].n < n {
            pos += 1;
        }
        let (raw, value) = match counts.get(pos) {
            Some(e) if e.n == n => (e.raw, e.value),
            _ => (0, 0.0),
        };
        let status = if raw > 0 { NStatus::Represented } else { NStatus::Exceptional };
        if raw == 0 {
            exceptional.push(n);
        }
        per_n.push(PerN { n, raw, value, status });
    }
    let fraction = if admissible == 0 { 0.0 } else { exceptional.len() as f64 / admissible as f64 };
    let mut params = window_params(w, k, s);
    params.push(("N", n0 as f64));
    params.push(("width", width as f64));
    let mut r = CountReport::new(CountKind::Exceptional, &params, exceptional.len() as u128, fraction);
    r.per_n = Some(per_n);
    r.admissible = Some(admissible);
    r.exceptional = Some(exceptional);
    Ok(r)
}
