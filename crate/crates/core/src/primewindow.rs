//! Primes in the short interval `[X - Y, X + Y]`.

use std::io::{Read, Write};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

const MAX_HI: u64 = i64::MAX as u64;
const MAX_SEGMENT: u64 = 1 << 22;
const CACHE_MAGIC: &[u8; 8] = b"CLABPW\x00\x01";

/// Sieved primes of a window with their logarithms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrimeWindow {
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub lo: u64,
    pub hi: u64,
    pub primes: Vec<u64>,
    #[serde(skip)]
    pub logs: Vec<f64>,
}

impl PrimeWindow {
    /// Window made of an explicit list of primes; `lo`/`hi` are its extremes.
    pub fn from_primes(mut primes: Vec<u64>) -> Result<Self> {
        primes.sort_unstable();
        primes.dedup();
        if let Some(&p) = primes.iter().find(|&&p| !is_prime(p)) {
            return Err(Error::input(format!("{p} is not prime")));
        }
        let lo = primes.first().copied().unwrap_or(2);
        let hi = primes.last().copied().unwrap_or(2);
        let logs = primes.iter().map(|&p| (p as f64).ln()).collect();
        Ok(Self { x: (lo + hi) as f64 / 2.0, y: (hi - lo) as f64 / 2.0, lo, hi, primes, logs })
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// `(p, log p)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.primes.iter().copied().zip(self.logs.iter().copied())
    }

    pub fn sum_logs(&self) -> f64 {
        crate::scalar::kahan_real(self.logs.iter().copied())
    }

    pub fn max_log(&self) -> f64 {
        self.logs.last().copied().unwrap_or(0.0)
    }
}

/// Integer endpoints `[floor(X - Y), ceil(X + Y)]`.
pub fn window_bounds(x: f64, y: f64) -> Result<(u64, u64)> {
    if !(x >= 2.0) || !x.is_finite() {
        return Err(Error::input(format!("X = {x} must be at least 2")));
    }
    if !(y >= 1.0 && y <= x) {
        return Err(Error::input(format!("Y = {y} must satisfy 1 <= Y <= X")));
    }
    let hi = (x + y).ceil();
    if hi > MAX_HI as f64 {
        return Err(Error::input(format!("window end {hi} exceeds 2^63 - 1")));
    }
    Ok(((x - y).floor().max(0.0) as u64, hi as u64))
}

/// Primes in `[floor(X - Y), ceil(X + Y)]` by a segmented sieve.
pub fn sieve_window(x: f64, y: f64) -> Result<PrimeWindow> {
    let (lo, hi) = window_bounds(x, y)?;
    let seg = (2 * y.ceil() as u64 + 1).min(MAX_SEGMENT);
    let primes = sieve_range(lo, hi, seg)?;
    certify_sample(&primes, lo ^ hi.rotate_left(17))?;
    let expected = (hi - lo) as f64 / x.ln();
    if !primes.is_empty() && (primes.len() as f64 > 3.0 * expected || (primes.len() as f64) < expected / 3.0) {
        warn!("window [{lo}, {hi}] holds {} primes, expected about {expected:.0}", primes.len());
    }
    let logs = primes.iter().map(|&p| (p as f64).ln()).collect();
    Ok(PrimeWindow { x, y, lo, hi, primes, logs })
}

/// Primes `p` with `lo <= p <= hi`, sieving segments of `segment` entries.
pub fn sieve_range(lo: u64, hi: u64, segment: u64) -> Result<Vec<u64>> {
    if hi > MAX_HI {
        return Err(Error::input("window end exceeds 2^63 - 1"));
    }
    let lo = lo.max(2);
    if hi < lo {
        return Ok(Vec::new());
    }
    let segment = segment.max(1);
    let base = simple_sieve(isqrt(hi));
    let starts: Vec<u64> = (0..).map(|i| lo + i * segment).take_while(|&s| s <= hi).collect();
    let chunks: Vec<Vec<u64>> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + segment - 1).min(hi);
            sieve_segment(start, end, &base)
        })
        .collect();
    Ok(chunks.concat())
}

fn sieve_segment(start: u64, end: u64, base: &[u64]) -> Vec<u64> {
    let len = (end - start + 1) as usize;
    let mut composite = vec![false; len];
    for &p in base {
        if p * p > end {
            break;
        }
        let first = (p * p).max(start.div_ceil(p) * p);
        let mut m = first;
        while m <= end {
            composite[(m - start) as usize] = true;
            m += p;
        }
    }
    (0..len).filter(|&i| !composite[i]).map(|i| start + i as u64).filter(|&n| n >= 2).collect()
}

/// Primes up to `n` by the sieve of Eratosthenes.
pub fn simple_sieve(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut is = vec![true; n + 1];
    is[0] = false;
    is[1] = false;
    let mut i = 2;
    while i * i <= n {
        if is[i] {
            let mut j = i * i;
            while j <= n {
                is[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    is.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u64).collect()
}

pub fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller–Rabin, valid for every `n < 2^64`.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn certify_sample(primes: &[u64], seed: u64) -> Result<()> {
    if primes.is_empty() {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = (primes.len() / 100).max(1);
    for _ in 0..picks {
        let p = primes[rng.random_range(0..primes.len())];
        if !is_prime(p) {
            return Err(Error::Internal(format!("sieve produced composite {p}")));
        }
    }
    Ok(())
}

/// Von Mangoldt support of the window: every prime power `p^l` in
/// `[floor(X - Y), ceil(X + Y)]` paired with `log p`, ascending in `n`.
pub fn lambda_window(x: f64, y: f64) -> Result<Vec<(u64, f64)>> {
    let w = sieve_window(x, y)?;
    Ok(lambda_support(&w))
}

/// Prime-power support for the integer range of an already sieved window.
pub fn lambda_support(w: &PrimeWindow) -> Vec<(u64, f64)> {
    let mut out: Vec<(u64, f64)> = w.iter().collect();
    for p in simple_sieve(isqrt(w.hi)) {
        let mut pl = p.checked_mul(p);
        while let Some(v) = pl {
            if v > w.hi {
                break;
            }
            if v >= w.lo {
                out.push((v, (p as f64).ln()));
            }
            pl = v.checked_mul(p);
        }
    }
    out.sort_by_key(|e| e.0);
    out
}

fn write_varint<W: Write>(out: &mut W, mut v: u64) -> std::io::Result<()> {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            return out.write_all(&[byte]);
        }
        out.write_all(&[byte | 0x80])?;
    }
}

fn read_varint<R: Read>(input: &mut R) -> Result<u64> {
    let mut v = 0u64;
    let mut shift = 0;
    loop {
        let mut b = [0u8; 1];
        input.read_exact(&mut b)?;
        if shift >= 64 {
            return Err(Error::input("malformed varint in cache"));
        }
        v |= ((b[0] & 0x7f) as u64) << shift;
        if b[0] & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

/// Cache layout: magic (8 bytes), `X` and `Y` as little-endian f64 bits,
/// prime count as little-endian u64, then LEB128 gaps between consecutive
/// primes (the first gap is measured from zero).
pub fn write_cache<W: Write>(w: &PrimeWindow, out: &mut W) -> Result<()> {
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&w.x.to_bits().to_le_bytes())?;
    out.write_all(&w.y.to_bits().to_le_bytes())?;
    out.write_all(&(w.primes.len() as u64).to_le_bytes())?;
    let mut prev = 0;
    for &p in &w.primes {
        write_varint(out, p - prev)?;
        prev = p;
    }
    Ok(())
}

pub fn read_cache<R: Read>(input: &mut R) -> Result<PrimeWindow> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::input("not a prime window cache file"));
    }
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    let x = f64::from_bits(u64::from_le_bytes(buf));
    input.read_exact(&mut buf)?;
    let y = f64::from_bits(u64::from_le_bytes(buf));
    input.read_exact(&mut buf)?;
    let count = u64::from_le_bytes(buf);
    let (lo, hi) = window_bounds(x, y)?;
    let mut primes = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut prev = 0u64;
    for _ in 0..count {
        prev = prev
            .checked_add(read_varint(input)?)
            .ok_or_else(|| Error::input("cache gap overflows"))?;
        primes.push(prev);
    }
    let logs = primes.iter().map(|&p| (p as f64).ln()).collect();
    Ok(PrimeWindow { x, y, lo, hi, primes, logs })
}
