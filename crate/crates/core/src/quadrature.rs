//! Gauss–Legendre panel quadrature.

use std::sync::OnceLock;

use num_complex::Complex;

use crate::scalar::Real;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Absolute nodes and weights of the 16-point rule on each panel `[e_i, e_{i+1}]`.
pub fn panel_nodes(edges: &[f64]) -> Vec<(f64, f64)> {
    let (x, w) = gl16();
    let mut out = Vec::with_capacity(16 * edges.len().saturating_sub(1));
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in x.iter().zip(w) {
            out.push((mid + half * xi, half * wi));
        }
    }
    out
}

/// `int_{t0}^{t1} e(lambda t^k) dt`, panels sized so each holds at most a
/// quarter oscillation.
pub fn oscillatory_power_integral(t0: f64, t1: f64, k: u32, lambda: f64) -> Complex<f64> {
    let max_rate = lambda.abs() * k as f64 * t1.max(t0).powi(k as i32 - 1);
    let panels = ((max_rate * (t1 - t0) * 4.0).ceil() as usize).clamp(4, 1 << 24);
    let edges: Vec<f64> = (0..=panels).map(|i| t0 + (t1 - t0) * i as f64 / panels as f64).collect();
    let mut acc = crate::scalar::KahanSum::<f64>::new();
    for (t, w) in panel_nodes(&edges) {
        let ph = lambda * t.powi(k as i32);
        acc.add(f64::unit(ph - ph.round()) * w);
    }
    acc.value()
}
