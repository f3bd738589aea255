//! Independent reference computations for unit tests: fixed-order
//! Gauss–Legendre quadrature and the integrated form of the radial kernel.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [−1, 1].
pub fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite 64-point Gauss–Legendre over `panels` equal pieces of [a, b].
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let rule = RULE.get_or_init(|| legendre_rule(64));
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|j| {
            let (lo, hi) = (a + h * j as f64, a + h * (j + 1) as f64);
            rule.iter()
                .map(|&(x, w)| w * f((lo + hi) / 2.0 + (hi - lo) / 2.0 * x))
                .sum::<f64>()
                * (hi - lo)
                / 2.0
        })
        .sum()
}

/// K_{m,c}(r) = 4c·r^{1−n}(1+r²)^{n−2}∫₀^r τ^{n−1}(1+τ²)^{−n−m} dτ.
pub fn kernel(n: usize, m: u32, c: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let ni = n as i32;
    let inner = gauss_legendre(
        |t| t.powi(ni - 1) * (1.0 + t * t).powi(-ni - m as i32),
        0.0,
        r,
        8,
    );
    4.0 * c * r.powi(1 - ni) * (1.0 + r * r).powi(ni - 2) * inner
}

/// ∫₀^r K_{m,c}.
pub fn log_profile(n: usize, m: u32, c: f64, r: f64) -> f64 {
    gauss_legendre(|t| kernel(n, m, c, t), 0.0, r, 8)
}
