//! Major and minor arcs, and the refined split of the minor arcs.
//!
//! With thresholds `P <= Q` and `Q0`, a point `alpha` is
//! * `major` when some `q <= P` has `|q alpha - a| <= 1/Q`,
//! * otherwise `minor1` or `minor2` according to whether the least `q` with
//!   `|q alpha - a| <= 1/Q0` exceeds `P`.
//!
//! The least such `q` is always a continued-fraction convergent, so
//! classification walks the convergents once. Boundary points are closed on
//! the smaller side: `|q alpha - a| = 1/Q` is major.

use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{euler_phi, first_convergent_within, fx_to_f64, gcd, ProblemParams, RationalApprox};
use crate::error::{Error, Result};
use crate::phase::Phase;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcLabel {
    Major,
    Minor1,
    Minor2,
}

impl ArcLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ArcLabel::Major => "major",
            ArcLabel::Minor1 => "minor1",
            ArcLabel::Minor2 => "minor2",
        }
    }
}

/// The three heights defining the dissection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArcThresholds {
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "Q0")]
    pub q0: f64,
}

impl From<&ProblemParams> for ArcThresholds {
    fn from(p: &ProblemParams) -> Self {
        ArcThresholds { p: p.p, q: p.q, q0: p.q0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArcClassification {
    pub label: ArcLabel,
    pub witness: RationalApprox,
    pub thresholds: ArcThresholds,
}

pub fn classify(alpha: Phase, params: &ProblemParams) -> Result<ArcClassification> {
    classify_with(alpha, ArcThresholds::from(params))
}

pub fn classify_with(alpha: Phase, t: ArcThresholds) -> Result<ArcClassification> {
    if !(t.q0 >= 1.0) {
        return Err(Error::input(format!("degenerate dissection: Q0 = {} < 1", t.q0)));
    }
    if let Some(w) = first_convergent_within(alpha, t.p, 1.0 / t.q) {
        return Ok(ArcClassification { label: ArcLabel::Major, witness: w, thresholds: t });
    }
    let w = first_convergent_within(alpha, t.q0, 1.0 / t.q0)
        .ok_or_else(|| Error::Internal(format!("no approximation within 1/Q0 for alpha = {}", alpha.to_f64())))?;
    let label = if w.q as f64 > t.p { ArcLabel::Minor1 } else { ArcLabel::Minor2 };
    Ok(ArcClassification { label, witness: w, thresholds: t })
}

/// Nearest `(a, |q alpha - a|)` in fixed point; ties go to the lower `a`.
fn nearest(alpha: Phase, q: u64) -> (u128, u128) {
    let (hi, lo) = (alpha.0 >> 64, alpha.0 & u64::MAX as u128);
    let q = q as u128;
    let int = (q * hi + ((q * lo) >> 64)) >> 64;
    let frac = alpha.0.wrapping_mul(q);
    if frac <= 1u128 << 127 {
        (int, frac)
    } else {
        (int + 1, frac.wrapping_neg())
    }
}

/// Direct scan over all `q <= Q0`; the reference the classifier must match.
pub fn classify_by_scan(alpha: Phase, t: ArcThresholds) -> Result<ArcClassification> {
    if !(t.q0 >= 1.0) {
        return Err(Error::input(format!("degenerate dissection: Q0 = {} < 1", t.q0)));
    }
    let witness = |q: u64, a: u128, e: u128| RationalApprox { a, q: q as u128, err: fx_to_f64(e), alpha: alpha.to_f64() };
    let qmax = t.q0.floor() as u64;
    for q in 1..=t.p.floor() as u64 {
        let (a, e) = nearest(alpha, q);
        if fx_to_f64(e) <= 1.0 / t.q && gcd(a, q as u128) == 1 {
            return Ok(ArcClassification { label: ArcLabel::Major, witness: witness(q, a, e), thresholds: t });
        }
    }
    for q in 1..=qmax {
        let (a, e) = nearest(alpha, q);
        if fx_to_f64(e) <= 1.0 / t.q0 && gcd(a, q as u128) == 1 {
            let label = if q as f64 > t.p { ArcLabel::Minor1 } else { ArcLabel::Minor2 };
            return Ok(ArcClassification { label, witness: witness(q, a, e), thresholds: t });
        }
    }
    Err(Error::Internal("scan found no approximation".into()))
}

/// Classify `alpha_j = j / points` for `0 <= j < points`.
pub fn classify_grid(points: u64, t: ArcThresholds) -> Result<Vec<(f64, ArcClassification)>> {
    (0..points)
        .into_par_iter()
        .map(|j| {
            let a = Phase::from_ratio(j as i128, points as u128);
            classify_with(a, t).map(|c| (j as f64 / points as f64, c))
        })
        .collect()
}

/// Lebesgue measure of the major arcs inside `[0, 1)`.
pub fn major_arc_measure(params: &ProblemParams) -> f64 {
    major_arc_measure_with(params.p, params.q)
}

/// Measure for explicit heights. The closed form `sum_{q <= P} 2 phi(q) / (q Q)`
/// is used when `P^2 <= Q/2` (arcs disjoint); otherwise the arcs are merged.
pub fn major_arc_measure_with(p: f64, q: f64) -> f64 {
    let pmax = p.floor().max(1.0) as u64;
    if (pmax as f64).powi(2) <= q / 2.0 || pmax > 30_000 {
        if pmax > 30_000 && (pmax as f64).powi(2) > q / 2.0 {
            log::warn!("P = {p} too large for the interval union; overlaps ignored");
        }
        return measure_formula(pmax, q);
    }
    measure_union(pmax, q)
}

fn measure_formula(pmax: u64, q: f64) -> f64 {
    crate::scalar::kahan_real((1..=pmax).map(|d| euler_phi(d) as f64 * 2.0 / (d as f64 * q)))
}

/// Sum of the merged arc intervals clipped to `[0, 1]`.
///
/// Lengths are accumulated from exact centre differences so that many
/// tiny disjoint arcs do not pick up endpoint rounding.
pub fn measure_union(pmax: u64, q: f64) -> f64 {
    // (a, d, left radius, right radius)
    let mut iv: Vec<(u64, u64, f64, f64)> = Vec::new();
    for d in 1..=pmax {
        let r = 1.0 / (d as f64 * q);
        for a in 0..=d {
            if gcd(a as u128, d as u128) != 1 {
                continue;
            }
            let rl = if a == 0 { 0.0 } else { r };
            let rr = if a == d { 0.0 } else { r };
            iv.push((a, d, rl, rr));
        }
    }
    iv.sort_by(|x, y| {
        let lx = x.0 as f64 / x.1 as f64 - x.2;
        let ly = y.0 as f64 / y.1 as f64 - y.2;
        lx.partial_cmp(&ly).unwrap()
    });
    // centre difference c_x - c_y
    let diff = |x: &(u64, u64, f64, f64), y: &(u64, u64, f64, f64)| {
        (x.0 as i128 * y.1 as i128 - y.0 as i128 * x.1 as i128) as f64 / (x.1 as f64 * y.1 as f64)
    };
    let mut parts = vec![iv[0].2 + iv[0].3];
    let mut head = iv[0];
    for cur in &iv[1..] {
        let reach = diff(&head, cur) + head.3 + cur.2;
        if reach < 0.0 {
            parts.push(cur.2 + cur.3);
            head = *cur;
        } else {
            let extra = diff(cur, &head) + cur.3 - head.3;
            if extra > 0.0 {
                parts.push(extra);
                head = *cur;
            }
        }
    }
    crate::scalar::kahan_real(parts)
}
