//! Weighted distributions of sums of integer atoms.
//!
//! Atoms are integers `v_i` (prime powers, or integer powers) with real
//! weights. They are compressed onto the lattice `base + step * j`, where
//! `step` is the gcd of all differences, so an `f`-fold sum is represented by
//! the index `J` with value `f * base + step * J`. Each key carries the exact
//! number of ordered tuples reaching it and the sum of their weight
//! products. Dense storage is used while the index band is short, sparse
//! sorted storage otherwise; both give identical results.

use crate::error::{Error, Result};
use crate::scalar::kahan_real;

/// Index span above which sparse storage is used.
pub const DENSE_LIMIT: u128 = 1 << 22;

#[derive(Clone, Debug)]
pub struct Atoms {
    pub base: u128,
    pub step: u128,
    /// Sorted lattice indices with weights.
    pub items: Vec<(u128, f64)>,
}

impl Atoms {
    /// Compress distinct integer values (duplicates are merged).
    pub fn from_values(values: &[(u128, f64)]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("no atoms"));
        }
        let mut v = values.to_vec();
        v.sort_by_key(|e| e.0);
        let base = v[0].0;
        let step = v.iter().fold(0u128, |g, e| num_integer::gcd(g, e.0 - base)).max(1);
        let mut items: Vec<(u128, f64)> = Vec::with_capacity(v.len());
        for (val, w) in v {
            let j = (val - base) / step;
            match items.last_mut() {
                Some(last) if last.0 == j => last.1 += w,
                _ => items.push((j, w)),
            }
        }
        Ok(Self { base, step, items })
    }

    pub fn max_index(&self) -> u128 {
        self.items.last().map(|e| e.0).unwrap_or(0)
    }

    /// Index of an `fold`-fold sum equal to `value`, if it lies on the lattice.
    pub fn index_of(&self, value: u128, fold: u32) -> Option<u128> {
        let offset = self.base.checked_mul(fold as u128)?;
        let d = value.checked_sub(offset)?;
        (d % self.step == 0).then(|| d / self.step)
    }

    pub fn value_of(&self, index: u128, fold: u32) -> u128 {
        self.base * fold as u128 + self.step * index
    }
}

#[derive(Clone, Debug)]
enum Store {
    Dense { offset: u128, counts: Vec<u128>, weights: Vec<f64> },
    Sparse { keys: Vec<u128>, counts: Vec<u128>, weights: Vec<f64> },
}

/// Distribution of `fold`-fold ordered sums, keyed by lattice index.
#[derive(Clone, Debug)]
pub struct Dist {
    pub fold: u32,
    store: Store,
}

impl Dist {
    /// The empty sum.
    pub fn unit() -> Self {
        Dist { fold: 0, store: Store::Sparse { keys: vec![0], counts: vec![1], weights: vec![1.0] } }
    }

    /// `fold`-fold convolution power restricted after each stage by `band(stage)`.
    pub fn power(atoms: &Atoms, fold: u32, band: impl Fn(u32) -> (u128, u128), budget: &mut u128) -> Result<Dist> {
        let mut d = Dist::unit();
        for stage in 1..=fold {
            d = d.step(atoms, band(stage), budget)?;
        }
        Ok(d)
    }

    fn min_max(&self) -> Option<(u128, u128)> {
        let mut it = self.iter();
        let first = it.next()?.0;
        let last = self.iter().last()?.0;
        Some((first, last))
    }

    /// Add one more atom, keeping only indices in `band` (inclusive).
    pub fn step(&self, atoms: &Atoms, band: (u128, u128), budget: &mut u128) -> Result<Dist> {
        let fold = self.fold + 1;
        let Some((cur_lo, cur_hi)) = self.min_max() else {
            return Ok(Dist { fold, store: Store::Sparse { keys: vec![], counts: vec![], weights: vec![] } });
        };
        let lo = band.0.max(cur_lo);
        let hi = band.1.min(cur_hi.saturating_add(atoms.max_index()));
        if hi < lo {
            return Ok(Dist { fold, store: Store::Sparse { keys: vec![], counts: vec![], weights: vec![] } });
        }
        let cells = (self.len() as u128).saturating_mul(atoms.items.len() as u128);
        if cells > *budget {
            return Err(Error::budget(format!(
                "convolution stage needs {cells} cells, remaining budget {}",
                *budget
            )));
        }
        *budget -= cells;
        let span = hi - lo + 1;
        if span <= DENSE_LIMIT {
            let mut counts = vec![0u128; span as usize];
            let mut weights = vec![0.0f64; span as usize];
            for (key, c, w) in self.iter() {
                for &(j, aw) in &atoms.items {
                    let t = key + j;
                    if t < lo {
                        continue;
                    }
                    if t > hi {
                        break;
                    }
                    let i = (t - lo) as usize;
                    counts[i] += c;
                    weights[i] += w * aw;
                }
            }
            Ok(Dist { fold, store: Store::Dense { offset: lo, counts, weights } })
        } else {
            let mut entries: Vec<(u128, u128, f64)> = Vec::new();
            for (key, c, w) in self.iter() {
                for &(j, aw) in &atoms.items {
                    let t = key + j;
                    if t < lo {
                        continue;
                    }
                    if t > hi {
                        break;
                    }
                    entries.push((t, c, w * aw));
                }
            }
            entries.sort_by_key(|e| e.0);
            let mut keys = Vec::new();
            let mut counts = Vec::new();
            let mut weights = Vec::new();
            for (t, c, w) in entries {
                if keys.last() == Some(&t) {
                    *counts.last_mut().unwrap() += c;
                    *weights.last_mut().unwrap() += w;
                } else {
                    keys.push(t);
                    counts.push(c);
                    weights.push(w);
                }
            }
            Ok(Dist { fold, store: Store::Sparse { keys, counts, weights } })
        }
    }

    /// Number of occupied keys.
    pub fn len(&self) -> usize {
        match &self.store {
            Store::Dense { counts, .. } => counts.iter().filter(|&&c| c > 0).count(),
            Store::Sparse { keys, .. } => keys.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Occupied `(index, count, weight)` triples in ascending index order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (u128, u128, f64)> + '_> {
        match &self.store {
            Store::Dense { offset, counts, weights } => Box::new(
                counts
                    .iter()
                    .zip(weights)
                    .enumerate()
                    .filter(|(_, (&c, _))| c > 0)
                    .map(move |(i, (&c, &w))| (offset + i as u128, c, w)),
            ),
            Store::Sparse { keys, counts, weights } => Box::new(
                keys.iter().zip(counts).zip(weights).map(|((&k, &c), &w)| (k, c, w)),
            ),
        }
    }

    pub fn get(&self, index: u128) -> (u128, f64) {
        match &self.store {
            Store::Dense { offset, counts, weights } => {
                if index < *offset || index - offset >= counts.len() as u128 {
                    (0, 0.0)
                } else {
                    let i = (index - offset) as usize;
                    (counts[i], weights[i])
                }
            }
            Store::Sparse { keys, counts, weights } => match keys.binary_search(&index) {
                Ok(i) => (counts[i], weights[i]),
                Err(_) => (0, 0.0),
            },
        }
    }

    /// `(sum count^2, sum weight^2)`: the diagonal pairing of two equal sums.
    pub fn energy(&self) -> (u128, f64) {
        let raw = self.iter().map(|(_, c, _)| c * c).sum();
        let value = kahan_real(self.iter().map(|(_, _, w)| w * w));
        (raw, value)
    }

    /// Total tuple count and weight.
    pub fn mass(&self) -> (u128, f64) {
        (self.iter().map(|e| e.1).sum(), kahan_real(self.iter().map(|e| e.2)))
    }
}

/// `sum_x a(x) b(target - x)`: tuples of `a` followed by tuples of `b`.
pub fn match_sum(a: &Dist, b: &Dist, target: u128) -> (u128, f64) {
    let mut raw = 0u128;
    let mut ws = Vec::new();
    for (x, c, w) in a.iter() {
        if x > target {
            break;
        }
        let (cb, wb) = b.get(target - x);
        if cb > 0 {
            raw += c * cb;
            ws.push(w * wb);
        }
    }
    (raw, kahan_real(ws))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compression_and_lookup() {
        let a = Atoms::from_values(&[(121, 1.0), (169, 1.0), (289, 1.0)]).unwrap();
        assert_eq!((a.base, a.step), (121, 24));
        assert_eq!(a.items.iter().map(|e| e.0).collect::<Vec<_>>(), vec![0, 2, 7]);
        assert_eq!(a.index_of(169 * 5, 5), Some((845 - 605) / 24));
        assert_eq!(a.index_of(846, 5), None);
        assert_eq!(a.value_of(10, 5), 845);
    }

    #[test]
    fn dense_and_sparse_agree() {
        let vals: Vec<(u128, f64)> = [11u128, 13, 17, 19, 23].iter().map(|&p| (p * p * p, (p as f64).ln())).collect();
        let atoms = Atoms::from_values(&vals).unwrap();
        let mut budget = u128::MAX;
        let dense = Dist::power(&atoms, 3, |_| (0, u128::MAX), &mut budget).unwrap();
        // force sparse by a band wider than DENSE_LIMIT through a shifted lattice
        let mut shifted = atoms.clone();
        for it in shifted.items.iter_mut() {
            it.0 *= DENSE_LIMIT;
        }
        let sparse = Dist::power(&shifted, 3, |_| (0, u128::MAX), &mut budget).unwrap();
        let d: Vec<_> = dense.iter().collect();
        let s: Vec<_> = sparse.iter().map(|(k, c, w)| (k / DENSE_LIMIT, c, w)).collect();
        assert_eq!(d.len(), s.len());
        for (x, y) in d.iter().zip(&s) {
            assert_eq!((x.0, x.1), (y.0, y.1));
            assert!((x.2 - y.2).abs() < 1e-12 * x.2);
        }
        assert_eq!(dense.mass().0, 125);
    }

    #[test]
    fn budget_is_enforced() {
        let atoms = Atoms::from_values(&[(1, 1.0), (2, 1.0), (3, 1.0)]).unwrap();
        let mut budget = 5;
        assert!(matches!(Dist::power(&atoms, 3, |_| (0, u128::MAX), &mut budget), Err(Error::Budget(_))));
    }
}
