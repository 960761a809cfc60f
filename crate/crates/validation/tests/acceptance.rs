//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use circle_lab::arith::{big_k, derive_params, gamma, t_k};
use circle_lab::bounds::{self, WeylVariant};
use circle_lab::counting;
use circle_lab::dissection::{self, ArcThresholds};
use circle_lab::primewindow::{sieve_window, PrimeWindow};
use circle_lab::singular::{self, IntegralMethod, SeriesTables};
use circle_lab::{compute_r, Alpha, Phase};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn constants() -> Outcome {
    let got = (compute_r(2), compute_r(3), t_k(2), big_k(2));
    outcome(got == (24, 2, 3, 36), format!("R(2), R(3), t_2, K(2) = {got:?}"))
}

fn cube_solubility() -> Outcome {
    let mut wrong = Vec::new();
    for r in 0..9u128 {
        let soluble = singular::local_solubility(r, 7, 3, 9).unwrap();
        if soluble != (r != 0) {
            wrong.push(r);
        }
    }
    outcome(wrong.is_empty(), format!("residues mod 9 with wrong verdict: {wrong:?}"))
}

fn parseval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x: f64 = rng.random_range(1e3..1e6);
        let theta: f64 = rng.random_range(0.3..0.8);
        let k: u32 = rng.random_range(1..=4);
        let w = sieve_window(x, x.powf(theta)).unwrap();
        if w.is_empty() {
            continue;
        }
        let exact = counting::mean_value_I(1, k, &w).unwrap().value;
        let direct: f64 = w.logs.iter().map(|l| l * l).sum();
        worst = worst.max((exact - direct).abs() / direct);
    }
    outcome(worst <= 1e-9, format!("max relative deviation {worst:.3e}"))
}

fn rho_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    let mut represented = 0;
    for _ in 0..50 {
        let x: u64 = rng.random_range(50..20_000);
        let y: f64 = rng.random_range(5.0..150.0);
        let mut primes = sieve_window(x as f64, y).unwrap().primes;
        primes.truncate(rng.random_range(2..=25));
        if primes.is_empty() {
            primes.push(circle_lab::primewindow::simple_sieve(x + 200).into_iter().rfind(|&p| p >= 3).unwrap());
        }
        let w = PrimeWindow::from_primes(primes).unwrap();
        let s: u32 = rng.random_range(2..=6);
        let k: u32 = rng.random_range(1..=4);
        let n: u128 = if rng.random_bool(0.7) {
            (0..s).map(|_| (w.primes[rng.random_range(0..w.len())] as u128).pow(k)).sum()
        } else {
            let lo = (w.primes[0] as u128).pow(k) * s as u128;
            let hi = (*w.primes.last().unwrap() as u128).pow(k) * s as u128;
            rng.random_range(lo..=hi)
        };
        let fast = counting::rho(n, s, k, &w).unwrap();
        let (raw, value) = counting::rho_naive(n, s, k, &w).unwrap();
        if fast.raw != raw || (fast.value - value).abs() > 1e-9 * value.max(1.0) {
            mismatches += 1;
        }
        if raw > 0 {
            represented += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over 50 instances ({represented} with raw > 0)"))
}

fn vinogradov() -> Outcome {
    let mut diag_ok = true;
    for k in 1..=6 {
        for x in 1..=50u64 {
            diag_ok &= counting::vinogradov_J(1, k, x).unwrap().raw == x as u128;
        }
    }
    let j225 = counting::vinogradov_J(2, 2, 5).unwrap().raw;
    let xs: Vec<u64> = (4..=12).collect();
    let js: Vec<u128> = xs.iter().map(|&x| counting::vinogradov_J(3, 2, x).unwrap().raw).collect();
    let lx: Vec<f64> = xs.iter().map(|&x| (x as f64).ln()).collect();
    let lj: Vec<f64> = js.iter().map(|&j| (j as f64).ln()).collect();
    let fitted = slope(&lx, &lj);
    outcome(
        diag_ok && j225 == 45 && fitted <= 3.3,
        format!("J_1,k(X) = X: {diag_ok}; J_2,2(5) = {j225}; J_3,2(4..12) = {js:?}, log-log slope {fitted:.4} (limit 3.3)"),
    )
}

fn daemen() -> Outcome {
    let mut ratios = Vec::new();
    for x in [30.0f64, 60.0, 120.0, 240.0, 480.0] {
        let r = bounds::daemen_check(3, 2, x, x.powf(0.85)).unwrap();
        ratios.push(r.ratio);
    }
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    outcome(min > 0.0 && max / min <= 10.0, format!("ratios {ratios:.4?}, max/min {:.3}", max / min))
}

fn prop22() -> Outcome {
    let mut lm = Vec::new();
    let mut lp = Vec::new();
    for x in [250.0f64, 500.0, 1000.0, 2000.0] {
        let p = derive_params(2, 6, x, 0.85, 0.005, 0.05).unwrap();
        let w = sieve_window(p.x, p.y).unwrap();
        let r = bounds::prop22_check(6, &p, &w).unwrap();
        lm.push(r.measured.ln());
        lp.push((p.y.powi(5) / p.x).ln());
    }
    let sl = slope(&lp, &lm);
    outcome((sl - 1.0).abs() <= 0.5, format!("slope of I(3) against Y^5/X: {sl:.4}"))
}

fn vaughan() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let theta: f64 = rng.random_range(0.6..0.95);
        let lo: u64 = rng.random_range(100..100_000);
        let len: u64 = rng.random_range(10..2_000);
        let uv = 4.0 * (lo as f64).powf(2.0 - 2.0 * theta);
        let uv = uv.min(lo as f64 - 1.0).max(1.0);
        let k: u32 = rng.random_range(1..=3);
        let alpha = Alpha::Fixed(Phase(rng.random::<u128>()));
        let r = bounds::vaughan_decompose(lo, lo + len, k, alpha, uv, uv).unwrap();
        worst = worst.max(r.relative);
    }
    outcome(worst <= 1e-6, format!("max residual / sum|terms| = {worst:.3e}"))
}

fn series() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut tables = SeriesTables::new(5, 2);
    let mut worst_change = 0.0f64;
    let mut worst_n = 0;
    let mut over = 0;
    let mut min_margin = f64::MAX;
    for _ in 0..20 {
        let n = 24 * rng.random_range(10u128..1_000_000_000) + 5;
        let a = singular::singular_series_with(&mut tables, n, 1_000, 0.01, false).unwrap();
        let b = singular::singular_series_with(&mut tables, n, 10_000, 0.01, false).unwrap();
        let change = (b.partial - a.partial).abs() / b.partial.abs();
        if change > 0.01 {
            over += 1;
        }
        if change > worst_change {
            worst_change = change;
            worst_n = n;
        }
        min_margin = min_margin.min(b.partial - b.tail_estimate);
    }
    let mut worst_factor = 0.0f64;
    let mut count = 0;
    while count < 20 {
        let n = rng.random_range(100u128..1_000_000_000);
        if n % 24 == 5 {
            continue;
        }
        count += 1;
        let failing = [2u64, 3]
            .into_iter()
            .find(|&p| !singular::local_solubility(n, 5, 2, p.pow(gamma(2, p))).unwrap())
            .expect("n = 5 mod 24 fails somewhere");
        let f = singular::grouped_euler_factor(&mut tables, n, failing);
        worst_factor = worst_factor.max(f.abs());
    }
    outcome(
        min_margin > 0.0 && worst_change <= 0.01 && worst_factor <= 1e-6,
        format!("min(partial - tail) {min_margin:.4}, change 1e3->1e4 above 1% for {over}/20, worst {worst_change:.3e} at n = {worst_n}, max |failing factor| {worst_factor:.3e}"),
    )
}

fn integral() -> Outcome {
    let (x, y) = (200.0, 50.0);
    let ns: Vec<u128> = (-5..5).map(|j: i128| (5 * 40_000 + 4_000 * j) as u128).collect();
    let e = singular::singular_integral_batch(&ns, 5, 2, x, y, IntegralMethod::ExactCount).unwrap();
    let q = singular::singular_integral_batch(&ns, 5, 2, x, y, IntegralMethod::Quadrature).unwrap();
    let worst = e.iter().zip(&q).map(|(a, b)| (a.value - b.value).abs() / a.value).fold(0.0, f64::max);
    let norms: Vec<f64> = e.iter().map(|r| r.normalized).collect();
    let spread = norms.iter().cloned().fold(f64::MIN, f64::max) / norms.iter().cloned().fold(f64::MAX, f64::min);
    outcome(
        worst <= 1e-3 && spread <= 3.0,
        format!("max relative disagreement {worst:.3e}; normalized range {:.4}..{:.4}, max/min {spread:.3}",
            norms.iter().cloned().fold(f64::MAX, f64::min), norms.iter().cloned().fold(f64::MIN, f64::max)),
    )
}

fn dissection_oracle() -> Outcome {
    let sets = [
        derive_params(2, 5, 1e4, 0.7, 0.002, 0.01).unwrap(),
        derive_params(2, 5, 1e3, 0.6, 0.001, 0.01).unwrap(),
        derive_params(3, 7, 1e3, 0.65, 0.0005, 0.01).unwrap(),
    ];
    let mut mismatches = 0;
    let mut q0s = Vec::new();
    for p in &sets {
        let th = ArcThresholds::from(p);
        assert!(th.q0 <= 1e4 && th.q0 >= 1.0, "Q0 = {}", th.q0);
        q0s.push(th.q0.round());
        for j in 0..10_000u64 {
            let a = Phase::from_ratio(j as i128, 10_000);
            let c = dissection::classify_with(a, th).unwrap();
            let o = dissection::classify_by_scan(a, th).unwrap();
            if (c.label, c.witness.q, c.witness.a) != (o.label, o.witness.q, o.witness.a) {
                mismatches += 1;
            }
        }
    }
    let mut measure_bad = 0;
    let mut checked = 0;
    let heights = [(1.0, 50.0), (3.0, 100.0), (7.0, 98.0), (30.0, 1800.0), (100.0, 2e4), (250.0, 1.3e5)];
    for (pp, qq) in heights.iter().copied().chain(sets.iter().map(|p| (p.p, p.q))) {
        let pmax = pp.floor().max(1.0);
        if pmax * pmax > qq / 2.0 {
            continue;
        }
        checked += 1;
        let f = dissection::major_arc_measure_with(pp, qq);
        let u = dissection::measure_union(pmax as u64, qq);
        if (f - u).abs() > 1e-12 * u {
            measure_bad += 1;
        }
    }
    outcome(
        mismatches == 0 && measure_bad == 0,
        format!("{mismatches} grid mismatches (Q0 = {q0s:?}); measure formula vs union: {measure_bad} of {checked} disagree"),
    )
}

fn survey() -> Outcome {
    let p = derive_params(4, 9, 1e5, 0.87, 2e-5, 0.05).unwrap();
    let w = sieve_window(p.x, p.y).unwrap();
    let r = bounds::minor_arc_survey(&p, &w, 200, 0, WeylVariant::Prop23).unwrap();
    let listed: Vec<f64> = r.violations.iter().map(|v| v.alpha).collect();
    outcome(
        r.samples == 200 && r.fraction_within >= 0.99,
        format!("{}/{} within envelope, max |f|/envelope {:.4}, violations at {listed:?}", r.within_envelope, r.samples, r.max_ratio),
    )
}

fn scan() -> Outcome {
    let p = derive_params(2, 6, 1e3, 0.85, 0.005, 0.01).unwrap();
    let w = sieve_window(p.x, p.y).unwrap();
    let half = p.x * p.y;
    let n0 = (6.0 * p.x * p.x - half).floor() as u128;
    let r = counting::exceptional_scan(n0, (2.0 * half) as u128, 6, 2, &w).unwrap();
    let exceptional = r.exceptional.clone().unwrap_or_default();
    let confirmed = exceptional.iter().all(|&n| !counting::represents_naive(n, 6, 2, &w).unwrap());
    outcome(
        r.value <= 0.05 && confirmed,
        format!("{} exceptional of {} admissible (fraction {:.4}); naive re-check agrees: {confirmed}", exceptional.len(), r.admissible.unwrap_or(0), r.value),
    )
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("1 constants R(k), t_k, K", Duration::from_millis(1), constants),
        ("2 seven cubes insoluble mod 9 iff 9 | n", Duration::from_secs(1), cube_solubility),
        ("3 Parseval I(1) on 20 windows", Duration::from_secs(10), parseval),
        ("4 rho convolution vs naive enumeration", Duration::from_secs(60), rho_oracle),
        ("5 Vinogradov counts", Duration::from_secs(300), vinogradov),
        ("6 Daemen inequality ratio ladder", Duration::from_secs(600), daemen),
        ("7 mean value I(3) trend", Duration::from_secs(600), prop22),
        ("8 Vaughan identity residual", Duration::from_secs(60), vaughan),
        ("9 singular series positivity and local factors", Duration::from_secs(300), series),
        ("10 singular integral cross-method and bracket", Duration::from_secs(300), integral),
        ("11 dissection oracle and measure", Duration::from_secs(60), dissection_oracle),
        ("12 minor-arc envelope survey", Duration::from_secs(600), survey),
        ("13 exceptional scan", Duration::from_secs(600), scan),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        // The 1 ms budget of the constants check is measured on warm code.
        let timed_ok = took <= limit || (limit < Duration::from_millis(10) && {
            let again = Instant::now();
            let _ = run();
            again.elapsed() <= limit
        });
        let pass = o.pass && timed_ok;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.3}s of {:.3}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
