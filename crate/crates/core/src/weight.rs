//! Radial solutions of Δ_S log u = c(1+r²)^{−m} and the Bergman weight W_n.
//!
//! Everything is expressed through the kernel
//!
//! K_{m,c}(r) = (4c/n)·r(1+r²)^{n/2−2}·₂F₁(n/2, 1−m−n/2; n/2+1; r²/(1+r²)),
//!
//! the logarithmic derivative of the solution with u(0) = 1. m = 0 gives the
//! weight kernel k_c (so W_n = exp ∫k_{−1}); m ≥ 1 gives log F_m of the test
//! family. The argument r²/(1+r²) stays in [0, 1) for every r.

use crate::error::{Error, Result};
use crate::isoperimetry::CapGeometry;
use crate::specfun::HypParams;
use crate::specfun::{
    adaptive_quad, gamma_fn, gauss_2f1_split, integrate, kronrod_panel, QuadOptions,
};

/// Number of log-spaced radii in the standard grid (r = 0 is added on top).
pub const GRID_POINTS: usize = 512;
pub const GRID_MIN: f64 = 1e-4;
pub const GRID_MAX: f64 = 1e3;

/// 0 followed by [`GRID_POINTS`] log-spaced radii in [1e-4, 1e3].
pub fn standard_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(GRID_POINTS + 1);
    grid.push(0.0);
    grid.extend(log_space(GRID_MIN, GRID_MAX, GRID_POINTS));
    grid
}

/// `count` points log-spaced from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Parameter(format!("dimension must be ≥ 2, got {n}")));
    }
    Ok(())
}

fn kernel_params(n: usize, m: u32) -> HypParams<f64> {
    let h = n as f64 / 2.0;
    HypParams {
        a: h,
        b: 1.0 - m as f64 - h,
        c: h + 1.0,
    }
}

/// t = r²/(1+r²) and 1 − t = 1/(1+r²), both to full precision.
fn unit_argument(r: f64) -> (f64, f64) {
    let q = 1.0 + r * r;
    (r * r / q, 1.0 / q)
}

/// K_{m,c}(r), the derivative of log u for Δ_S log u = c(1+r²)^{−m}.
pub fn radial_kernel(n: usize, m: u32, c: f64, r: f64) -> Result<f64> {
    check_dim(n)?;
    if r < 0.0 || r.is_nan() {
        return Err(Error::Domain(format!("radius must be ≥ 0, got {r}")));
    }
    if c == 0.0 || r == 0.0 {
        return Ok(0.0);
    }
    if r.is_infinite() {
        return Err(Error::Domain("kernel is evaluated at finite radii".into()));
    }
    if n == 2 && m == 0 {
        return Ok(2.0 * c * r / (1.0 + r * r));
    }
    let (t, s) = unit_argument(r);
    let f = gauss_2f1_split(kernel_params(n, m), t, s)?;
    let nf = n as f64;
    // r(1+r²)^{n/2−2} written as r^{n−3}·... would overflow sooner; keep the power of (1+r²)
    Ok(4.0 * c / nf * r * (1.0 + r * r).powf(nf / 2.0 - 2.0) * f)
}

/// k_c(r) = d/dr log u_c(r).
pub fn k_profile(n: usize, c: f64, r: f64) -> Result<f64> {
    radial_kernel(n, 0, c, r)
}

/// Δ_S of the radial function with derivative K_{m,c}, evaluated from the
/// divergence form (1+r²)ⁿr^{1−n}/4·d/dr[r^{n−1}(1+r²)^{2−n}K], which
/// reduces to (2c/n)(1+r²)^{n/2−1}[(n/2)F(t) + tF′(t)] with F′ from the
/// contiguous relation F′ = (ab/c)·F(a+1, b+1; c+1; t).
pub fn laplace_log(n: usize, m: u32, c: f64, r: f64) -> Result<f64> {
    check_dim(n)?;
    if c == 0.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let p = kernel_params(n, m);
    let (t, s) = unit_argument(r);
    let f = gauss_2f1_split(p, t, s)?;
    let (scale, shifted) = p.derivative();
    let df = if scale == 0.0 {
        0.0
    } else {
        scale * gauss_2f1_split(shifted, t, s)?
    };
    Ok(2.0 * c / nf * (1.0 + r * r).powf(nf / 2.0 - 1.0) * (nf / 2.0 * f + t * df))
}

/// Left side of ((1+r²)/4)[(1+r²)k′ + k((1+r²)(n−1) + 2(2−n)r²)/r] = c minus c,
/// with the left side evaluated analytically by [`laplace_log`].
pub fn ode_residual(n: usize, c: f64, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Domain(format!("residual needs r > 0, got {r}")));
    }
    Ok(laplace_log(n, 0, c, r)? - c)
}

/// The same residual with k′ by central differences (step 1e-6·max(1, r));
/// a cross-check only, it loses digits to cancellation at large r.
pub fn ode_residual_fd(n: usize, c: f64, r: f64) -> Result<f64> {
    let h = 1e-6 * r.max(1.0);
    let h = h.min(r / 2.0);
    let k = k_profile(n, c, r)?;
    let dk = (k_profile(n, c, r + h)? - k_profile(n, c, r - h)?) / (2.0 * h);
    let q = 1.0 + r * r;
    let nf = n as f64;
    Ok(q / 4.0 * (q * dk + k * (q * (nf - 1.0) + 2.0 * (2.0 - nf) * r * r) / r) - c)
}

/// h_c(r) = ∫₀^r k_c by adaptive quadrature (absolute tolerance 1e-10).
pub fn h_profile(n: usize, c: f64, r: f64) -> Result<f64> {
    check_dim(n)?;
    if r < 0.0 || r.is_nan() {
        return Err(Error::Domain(format!("radius must be ≥ 0, got {r}")));
    }
    if n == 2 {
        return Ok(c * (r * r).ln_1p());
    }
    let f = |t: f64| k_profile(n, c, t);
    let mut total = 0.0;
    // unit-length pieces in log scale keep each piece smooth
    let mut a = 0.0;
    while a < r {
        let b = if a < 1.0 { r.min(1.0) } else { r.min(a * 4.0) };
        total += integrate(f, a, b, &QuadOptions::hybrid(1e-12))?.value;
        a = b;
    }
    Ok(total)
}

/// W_n(r) = u_{−1}(r) = exp h_{−1}(r).
pub fn weight_w(n: usize, r: f64) -> Result<f64> {
    Ok(h_profile(n, -1.0, r)?.exp())
}

/// Γ(1+n/2)Γ(n/2)/Γ(n) = ₂F₁(n/2, 1−n/2; n/2+1; 1), the sandwich constant.
/// Equals 1 for n = 2 and is < 1 for n > 2.
pub fn sandwich_constant(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    gamma_fn(1.0 + h).unwrap() * gamma_fn(h).unwrap() / gamma_fn(n as f64).unwrap()
}

/// Q(r) = ∫₀^r (4/n)s(1+s²)^{n/2−2} ds, the integrated kernel with F ≡ 1.
pub fn sandwich_exponent(n: usize, r: f64) -> f64 {
    let nf = n as f64;
    let l = (r * r).ln_1p();
    if n == 2 {
        return l;
    }
    4.0 * ((nf / 2.0 - 1.0) * l).exp_m1() / (nf * (nf - 2.0))
}

/// Bounds (lower, upper) on u_c(r) for c < 0: exp(cQ) ≤ u_c ≤ exp(G·c·Q)
/// with G the [`sandwich_constant`]. The Γ-factor bound is the upper one,
/// because 1 ≥ ₂F₁(…; t) ≥ G on [0, 1).
pub fn sandwich_bounds(n: usize, c: f64, r: f64) -> (f64, f64) {
    let q = sandwich_exponent(n, r);
    let g = sandwich_constant(n);
    let (a, b) = ((c * q).exp(), (g * c * q).exp());
    (a.min(b), a.max(b))
}

/// Whether u_c(r) lies between the [`sandwich_bounds`] (1e-12 relative slack
/// for rounding at r = 0).
pub fn sandwich_check(n: usize, c: f64, r: f64) -> Result<bool> {
    if n <= 2 || c >= 0.0 {
        return Err(Error::Parameter(
            "sandwich bounds need n > 2 and c < 0".into(),
        ));
    }
    RadialProfile::new(n, 0, c)?.within_sandwich(r)
}

/// Tabulated log-profile h(r) = ∫₀^r K_{m,c} on the standard grid.
///
/// Grid values come from 21-point Kronrod panels between neighbouring radii.
/// [`log_value`](Self::log_value) recomputes exactly from the nearest grid
/// node; [`log_value_interp`](Self::log_value_interp) is the cheap cubic
/// Hermite interpolant through (h, K).
#[derive(Debug, Clone)]
pub struct RadialProfile {
    n: usize,
    m: u32,
    c: f64,
    radii: Vec<f64>,
    h: Vec<f64>,
    k: Vec<f64>,
}

impl RadialProfile {
    pub fn new(n: usize, m: u32, c: f64) -> Result<Self> {
        check_dim(n)?;
        let radii = standard_grid();
        let mut h = Vec::with_capacity(radii.len());
        let mut k = Vec::with_capacity(radii.len());
        h.push(0.0);
        k.push(0.0);
        for w in radii.windows(2) {
            let piece = kronrod_panel(|t| radial_kernel(n, m, c, t), w[0], w[1])?;
            h.push(h.last().unwrap() + piece);
            k.push(radial_kernel(n, m, c, w[1])?);
        }
        Ok(Self {
            n,
            m,
            c,
            radii,
            h,
            k,
        })
    }

    /// [`sandwich_check`] against this profile, without rebuilding it.
    pub fn within_sandwich(&self, r: f64) -> Result<bool> {
        let (n, c) = (self.n, self.c);
        if n <= 2 || c >= 0.0 || self.m != 0 {
            return Err(Error::Parameter(
                "sandwich bounds need n > 2, m = 0 and c < 0".into(),
            ));
        }
        let log_u = self.log_value(r)?;
        let q = sandwich_exponent(n, r);
        let g = sandwich_constant(n);
        let slack = 1e-12 * log_u.abs().max(1e-300);
        Ok(c * q - slack <= log_u && log_u <= g * c * q + slack)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// h at the grid radii.
    pub fn log_values(&self) -> &[f64] {
        &self.h
    }

    /// K at the grid radii.
    pub fn derivatives(&self) -> &[f64] {
        &self.k
    }

    /// Index i with radii[i] ≤ r < radii[i+1] (clamped to the last cell).
    fn cell(&self, r: f64) -> usize {
        match self.radii.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(self.radii.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.radii.len() - 2),
        }
    }

    /// h(r), exact to quadrature precision for every r ≥ 0 (beyond the grid
    /// the tail integral is computed adaptively).
    pub fn log_value(&self, r: f64) -> Result<f64> {
        if r < 0.0 || r.is_nan() {
            return Err(Error::Domain(format!("radius must be ≥ 0, got {r}")));
        }
        if self.n == 2 && self.m == 0 {
            return Ok(self.c * (r * r).ln_1p());
        }
        let last = *self.radii.last().unwrap();
        if r > last {
            if r.is_infinite() {
                return Ok(if self.c < 0.0 {
                    f64::NEG_INFINITY
                } else if self.c > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                });
            }
            let f = |t: f64| radial_kernel(self.n, self.m, self.c, t);
            let mut total = *self.h.last().unwrap();
            let mut a = last;
            while a < r {
                let b = r.min(a * 4.0);
                total += integrate(f, a, b, &QuadOptions::hybrid(1e-14))?.value;
                a = b;
            }
            return Ok(total);
        }
        let i = self.cell(r);
        if r == self.radii[i] {
            return Ok(self.h[i]);
        }
        let piece = kronrod_panel(
            |t| radial_kernel(self.n, self.m, self.c, t),
            self.radii[i],
            r,
        )?;
        Ok(self.h[i] + piece)
    }

    /// Cubic Hermite interpolation of h on the grid; falls back to
    /// [`log_value`](Self::log_value) beyond it.
    pub fn log_value_interp(&self, r: f64) -> Result<f64> {
        if r > *self.radii.last().unwrap() || r < 0.0 {
            return self.log_value(r);
        }
        let i = self.cell(r);
        let (x0, x1) = (self.radii[i], self.radii[i + 1]);
        let d = x1 - x0;
        let s = (r - x0) / d;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        Ok(h00 * self.h[i] + h10 * d * self.k[i] + h01 * self.h[i + 1] + h11 * d * self.k[i + 1])
    }

    /// K(r) (exact).
    pub fn derivative(&self, r: f64) -> Result<f64> {
        radial_kernel(self.n, self.m, self.c, r)
    }
}

/// The Bergman weight W_n with its log-profile cached.
#[derive(Debug, Clone)]
pub struct Weight {
    profile: RadialProfile,
}

impl Weight {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            profile: RadialProfile::new(n, 0, -1.0)?,
        })
    }

    pub fn n(&self) -> usize {
        self.profile.n
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    /// log W_n(r).
    pub fn log_value(&self, r: f64) -> Result<f64> {
        self.profile.log_value(r)
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        Ok(self.log_value(r)?.exp())
    }

    /// Radius r with W_n(r)^α = t, for 0 < t < 1.
    pub fn level_radius(&self, alpha: f64, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Domain(format!(
                "weight level must lie in (0, 1), got {t}"
            )));
        }
        let target = t.ln() / alpha;
        if self.n() == 2 {
            // (1+r²)^{−1} = e^{target}
            return Ok((-target).exp_m1().sqrt());
        }
        let mut hi = 1.0;
        while self.log_value(hi)? > target {
            hi *= 2.0;
        }
        crate::specfun::invert_monotone_with(|r| self.log_value(r), target, 0.0, hi, 1e-15)
    }

    /// c(α) = 2ⁿσ_{n−1}∫₀^∞ W_n^α r^{n−1}(1+r²)^{−n} dr (relative tolerance 1e-11).
    pub fn normalization(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0) {
            return Err(Error::Parameter(format!("α must be positive, got {alpha}")));
        }
        let n = self.n();
        if n == 2 {
            return Ok(4.0 * std::f64::consts::PI / (alpha + 1.0));
        }
        let caps = CapGeometry::<f64>::new(n)?;
        let f = |r: f64| Ok(caps.volume_derivative(r) * (alpha * self.log_value(r)?).exp());
        let opts = QuadOptions::relative(1e-12);
        let mut total = 0.0;
        let mut a = 0.0;
        for b in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
            total += integrate(f, a, b, &opts)?.value;
            a = b;
        }
        total += integrate(f, a, f64::INFINITY, &opts)?.value;
        Ok(total)
    }
}

/// c(α) for dimension n.
pub fn normalization_c(n: usize, alpha: f64) -> Result<f64> {
    Weight::new(n)?.normalization(alpha)
}

/// ∫ₐᵇ f with hybrid tolerance; re-exported for callers that only need
/// quick integrals of profile data.
pub fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    Ok(adaptive_quad(f, a, b, tol)?.value)
}
