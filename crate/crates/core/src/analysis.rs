//! Level sets of radial densities: distribution functions ρ(t) = m_S{u > t},
//! decreasing rearrangements u*, the monotonicity residual
//! αΘ(ρ(t))ρ′(t) + 1/t, and sphere averages (submean value, radialization).
//!
//! Radial u need not be monotone: the half-line is split at the critical
//! points of log u into monotone segments and {u > t} is a finite union of
//! annuli. All measures here are raw m_S (no 1/c(α) normalization).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{laplace_beltrami, phi_x0, stereo_drop, ExtendedPoint, SpherePoint};
use crate::isoperimetry::CapGeometry;
use crate::specfun::{gauss_legendre_rule, integrate, invert_monotone_with, QuadOptions};
use crate::testfam::{Density, TestFunction};
use crate::weight::standard_grid;

/// A radial function given through log u and its r-derivative.
pub trait Radial: Sync {
    fn dim(&self) -> usize;
    fn log_value(&self, r: f64) -> Result<f64>;
    fn log_derivative(&self, r: f64) -> Result<f64>;
}

impl Radial for Density {
    fn dim(&self) -> usize {
        self.n()
    }

    fn log_value(&self, r: f64) -> Result<f64> {
        Density::log_value(self, r)
    }

    fn log_derivative(&self, r: f64) -> Result<f64> {
        Density::log_derivative(self, r)
    }
}

/// Adapter for closures (log u, d/dr log u).
pub struct RadialFn<F, G> {
    pub n: usize,
    pub log_value: F,
    pub log_derivative: G,
}

impl<F, G> Radial for RadialFn<F, G>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn log_value(&self, r: f64) -> Result<f64> {
        Ok((self.log_value)(r))
    }

    fn log_derivative(&self, r: f64) -> Result<f64> {
        Ok((self.log_derivative)(r))
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    increasing: bool,
}

/// Monotone-segment decomposition of a radial u plus the tabulated log u
/// used to bracket level crossings.
pub struct LevelSets<'a, U: Radial> {
    u: &'a U,
    caps: CapGeometry<f64>,
    grid: Vec<f64>,
    grid_log: Vec<f64>,
    segments: Vec<Segment>,
    log_max: f64,
    argmax: f64,
}

/// One crossing of a level: radius and whether u increases through it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub r: f64,
    pub increasing: bool,
}

/// ρ′(t) with an error bound for the differencing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derivative {
    pub value: f64,
    pub error: f64,
}

impl<'a, U: Radial> LevelSets<'a, U> {
    /// Scans d/dr log u on the standard grid for sign changes and refines each
    /// critical point. Beyond the grid u must be decreasing.
    pub fn new(u: &'a U) -> Result<Self> {
        let n = u.dim();
        let caps = CapGeometry::new(n)?;
        let grid = standard_grid();
        let grid_log = grid
            .iter()
            .map(|&r| u.log_value(r))
            .collect::<Result<Vec<_>>>()?;
        let grid_d = grid[1..]
            .iter()
            .map(|&r| u.log_derivative(r))
            .collect::<Result<Vec<_>>>()?;
        if *grid_d.last().unwrap() >= 0.0 {
            return Err(Error::Domain(
                "u does not decay beyond the tabulated range".into(),
            ));
        }
        let first = grid_d.iter().position(|&d| d != 0.0).unwrap_or(0);
        let mut breaks = vec![0.0];
        let mut increasing = vec![grid_d[first] > 0.0];
        // (index, sign) of the last non-zero derivative sample
        let mut last = (first, grid_d[first] > 0.0);
        for (i, &d) in grid_d.iter().enumerate().skip(first + 1) {
            if d == 0.0 {
                continue;
            }
            if (d > 0.0) != last.1 {
                let (lo, hi) = (grid[last.0 + 1], grid[i + 1]);
                let crit = invert_monotone_with(|r| u.log_derivative(r), 0.0, lo, hi, 0.0)?;
                breaks.push(crit);
                increasing.push(d > 0.0);
            }
            last = (i, d > 0.0);
        }
        breaks.push(f64::INFINITY);
        let segments: Vec<Segment> = (0..increasing.len())
            .map(|k| Segment {
                a: breaks[k],
                b: breaks[k + 1],
                increasing: increasing[k],
            })
            .collect();
        let mut log_max = f64::NEG_INFINITY;
        let mut argmax = 0.0;
        for s in &segments {
            // local maxima sit at the start of decreasing segments
            if !s.increasing {
                let v = u.log_value(s.a)?;
                if v > log_max {
                    log_max = v;
                    argmax = s.a;
                }
            }
        }
        Ok(Self {
            u,
            caps,
            grid,
            grid_log,
            segments,
            log_max,
            argmax,
        })
    }

    pub fn caps(&self) -> &CapGeometry<f64> {
        &self.caps
    }

    /// T = max u.
    pub fn max(&self) -> f64 {
        self.log_max.exp()
    }

    pub fn log_max(&self) -> f64 {
        self.log_max
    }

    pub fn argmax(&self) -> f64 {
        self.argmax
    }

    /// True when u is non-increasing in r (one decreasing segment).
    pub fn is_decreasing(&self) -> bool {
        self.segments.len() == 1 && !self.segments[0].increasing
    }

    /// Radii where u crosses level e^{log_t}.
    pub fn crossings(&self, log_t: f64) -> Result<Vec<Crossing>> {
        let mut out = Vec::new();
        for s in &self.segments {
            let la = self.u.log_value(s.a)?;
            let lb = if s.b.is_infinite() {
                f64::NEG_INFINITY
            } else {
                self.u.log_value(s.b)?
            };
            let (lo, hi) = if la < lb { (la, lb) } else { (lb, la) };
            if !(log_t > lo && log_t < hi) {
                continue;
            }
            let r = self.solve(s, log_t)?;
            out.push(Crossing {
                r,
                increasing: s.increasing,
            });
        }
        Ok(out)
    }

    /// Bracket from the tabulated values, then safeguarded Newton on log u.
    fn solve(&self, s: &Segment, log_t: f64) -> Result<f64> {
        let above = |v: f64| if s.increasing { v < log_t } else { v > log_t };
        // last tabulated point of the segment still on the starting side
        let start = self.grid.partition_point(|&r| r <= s.a);
        let end = self.grid.partition_point(|&r| r < s.b);
        let mut lo = s.a;
        let mut hi = f64::NAN;
        let idx = start + self.grid_log[start..end].partition_point(|&v| above(v));
        if idx > start {
            lo = self.grid[idx - 1];
        }
        if idx < end {
            hi = self.grid[idx];
        } else if s.b.is_finite() {
            hi = s.b;
        }
        if hi.is_nan() {
            // past the grid: double until the level is crossed
            hi = lo.max(1.0) * 2.0;
            while above(self.u.log_value(hi)?) {
                lo = hi;
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::Domain("level crossing escapes to infinity".into()));
                }
            }
        }
        newton_bracketed(
            |r| Ok((self.u.log_value(r)? - log_t, self.u.log_derivative(r)?)),
            lo,
            hi,
        )
    }

    /// ρ(t) = m_S{u > t}; vol(Sⁿ) for t ≤ 0 and 0 for t ≥ max u.
    pub fn distribution(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(self.caps.total_volume());
        }
        let log_t = t.ln();
        if log_t >= self.log_max {
            return Ok(0.0);
        }
        let mut rho = 0.0;
        for c in self.crossings(log_t)? {
            let v = self.caps.volume(c.r);
            rho += if c.increasing { -v } else { v };
        }
        Ok(rho)
    }

    /// ρ′(t) by 5-point centered differences with step min(1e-3·t, 1e-2·(T−t));
    /// the error bound is the Richardson difference between steps h and 2h
    /// plus the rounding term.
    pub fn distribution_derivative(&self, t: f64) -> Result<Derivative> {
        let big_t = self.max();
        if t >= big_t {
            return Err(Error::LevelAboveMax {
                level: t,
                max: big_t,
            });
        }
        if !(t > 0.0) {
            return Err(Error::Domain(format!("level must be positive, got {t}")));
        }
        let gap = big_t - t;
        if gap <= 1e-6 * big_t {
            return Err(Error::DegenerateLevel { level: t });
        }
        let h = (1e-3 * t).min(1e-2 * gap);
        let d1 = self.five_point(t, h)?;
        let d2 = self.five_point(t, 2.0 * h)?;
        let rho = self.distribution(t)?;
        let rounding = 1.5 * 8.0 * f64::EPSILON * rho.max(self.caps.total_volume() * 1e-3) / h;
        Ok(Derivative {
            value: d1,
            error: (d1 - d2).abs() / 15.0 * 2.0 + rounding,
        })
    }

    fn five_point(&self, t: f64, h: f64) -> Result<f64> {
        let f = |x: f64| self.distribution(x);
        Ok((f(t - 2.0 * h)? - 8.0 * f(t - h)? + 8.0 * f(t + h)? - f(t + 2.0 * h)?) / (12.0 * h))
    }

    /// ρ′(t) from the coarea formula for radial u: Σ ±V′(r_i)/u′(r_i).
    pub fn coarea_derivative(&self, t: f64) -> Result<f64> {
        let mut d = 0.0;
        for c in self.crossings(t.ln())? {
            let du = t * self.u.log_derivative(c.r)?;
            d += self.caps.volume_derivative(c.r) / du * if c.increasing { -1.0 } else { 1.0 };
        }
        Ok(d)
    }

    /// u*(s) = sup{t : ρ(t) > s}. Decreasing u uses u*(s) = u(R(s)); otherwise
    /// ρ(t) = s is solved for t.
    pub fn rearrangement(&self, s: f64) -> Result<f64> {
        Ok(self.log_rearrangement(s)?.exp())
    }

    /// log u*(s).
    pub fn log_rearrangement(&self, s: f64) -> Result<f64> {
        let vol = self.caps.total_volume();
        if s <= 0.0 {
            return Ok(self.log_max);
        }
        if s >= vol {
            return Ok(f64::NEG_INFINITY);
        }
        if self.is_decreasing() {
            return self.u.log_value(self.caps.radius_for_volume(s)?);
        }
        self.log_rearrangement_by_inversion(s)
    }

    /// log u*(s) by solving ρ(e^y) = s in y, whatever the shape of u.
    pub fn log_rearrangement_by_inversion(&self, s: f64) -> Result<f64> {
        let vol = self.caps.total_volume();
        if s <= 0.0 {
            return Ok(self.log_max);
        }
        if s >= vol {
            return Ok(f64::NEG_INFINITY);
        }
        let hi = self.log_max;
        let mut lo = hi - 1.0;
        while self.distribution(lo.exp())? <= s {
            lo = hi - 2.0 * (hi - lo);
            if lo < -700.0 {
                return Err(Error::Domain(format!(
                    "rearrangement below representable levels at s = {s}"
                )));
            }
        }
        invert_monotone_with(|y| Ok(self.distribution(y.exp())? - s), 0.0, lo, hi, 0.0)
    }

    /// Tabulates ρ and ρ′ on `count` levels log-spaced in (T·10⁻⁶, T), in
    /// decreasing order. Levels where ρ′ is not resolvable keep NaN.
    pub fn table(&self, count: usize) -> Result<DistributionTable> {
        let big_t = self.max();
        let levels: Vec<f64> = crate::weight::log_space(big_t * 1e-6, big_t, count + 1)[..count]
            .iter()
            .rev()
            .copied()
            .collect();
        let rows = levels
            .par_iter()
            .map(|&t| {
                let rho = self.distribution(t)?;
                let d = match self.distribution_derivative(t) {
                    Ok(d) => d,
                    Err(Error::DegenerateLevel { .. }) => Derivative {
                        value: f64::NAN,
                        error: f64::NAN,
                    },
                    Err(e) => return Err(e),
                };
                Ok((rho, d))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DistributionTable {
            n: self.u.dim(),
            levels,
            rho: rows.iter().map(|r| r.0).collect(),
            rho_prime: rows.iter().map(|r| r.1.value).collect(),
            rho_prime_error: rows.iter().map(|r| r.1.error).collect(),
            max_level: big_t,
            total: self.caps.total_volume(),
        })
    }
}

/// Safeguarded Newton for a sign change of g on [lo, hi]; `g` returns
/// (value, derivative). Runs to bracket collapse.
fn newton_bracketed<F: Fn(f64) -> Result<(f64, f64)>>(
    g: F,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let (glo, _) = g(lo)?;
    let (ghi, _) = g(hi)?;
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        return Err(Error::Bracket {
            target: 0.0,
            lo,
            hi,
            f_lo: glo,
            f_hi: ghi,
        });
    }
    let lo_positive = glo > 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d) = g(x)?;
        if v == 0.0 {
            return Ok(x);
        }
        if (v > 0.0) == lo_positive {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - v / d;
        let next = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs()
            || hi - lo <= 2.0 * f64::EPSILON * hi.abs()
        {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Convergence {
        iterations: 200,
        last_term: hi - lo,
    })
}

/// Sampled t ↦ ρ(t), with ρ′ and its differencing error; levels decrease.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionTable {
    pub n: usize,
    pub levels: Vec<f64>,
    pub rho: Vec<f64>,
    pub rho_prime: Vec<f64>,
    pub rho_prime_error: Vec<f64>,
    pub max_level: f64,
    pub total: f64,
}

impl DistributionTable {
    /// CSV with columns t, rho, rho_prime (shortest round-trip decimals).
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Parameter(format!("csv: {e}"));
        out.write_record(["t", "rho", "rho_prime"]).map_err(io)?;
        for i in 0..self.levels.len() {
            out.write_record([
                self.levels[i].to_string(),
                self.rho[i].to_string(),
                self.rho_prime[i].to_string(),
            ])
            .map_err(io)?;
        }
        out.flush()
            .map_err(|e| Error::Parameter(format!("csv: {e}")))?;
        Ok(())
    }

    /// u*(s) by linear interpolation of the table in (ρ, log t).
    pub fn rearrangement(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return self.max_level;
        }
        // rho increases along the (decreasing) level list
        let i = self.rho.partition_point(|&r| r <= s);
        if i == 0 {
            return self.max_level;
        }
        if i >= self.rho.len() {
            return *self.levels.last().unwrap();
        }
        let (r0, r1) = (self.rho[i - 1], self.rho[i]);
        let (l0, l1) = (self.levels[i - 1].ln(), self.levels[i].ln());
        let w = if r1 > r0 { (s - r0) / (r1 - r0) } else { 0.0 };
        (l0 + w * (l1 - l0)).exp()
    }
}

/// ρ(t) for a radial u.
pub fn distribution<U: Radial>(u: &U, t: f64) -> Result<f64> {
    LevelSets::new(u)?.distribution(t)
}

/// Residual of the monotonicity inequality at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityResidual {
    pub level: f64,
    /// αΘ(ρ(t))ρ′(t) + 1/t
    pub residual: f64,
    /// 1e-6 plus αΘ(ρ)·(differencing error of ρ′)
    pub tolerance: f64,
}

impl MonotonicityResidual {
    pub fn passes(&self) -> bool {
        self.residual <= self.tolerance
    }
}

/// αΘ(ρ(t))ρ′(t) + 1/t for u = |f|ᵖW_nᵅ.
pub fn monotonicity_residual<U: Radial>(
    sets: &LevelSets<U>,
    alpha: f64,
    t: f64,
) -> Result<MonotonicityResidual> {
    let d = sets.distribution_derivative(t)?;
    let rho = sets.distribution(t)?;
    let theta = sets.caps().theta(rho)?;
    Ok(MonotonicityResidual {
        level: t,
        residual: alpha * theta * d.value + 1.0 / t,
        tolerance: 1e-6 + alpha * theta * d.error,
    })
}

/// Residuals at `count` levels log-spaced in [0.01T, 0.99T].
pub fn monotonicity_sweep(f: &TestFunction, count: usize) -> Result<Vec<MonotonicityResidual>> {
    let density = f.density()?;
    let sets = LevelSets::new(&density)?;
    let big_t = sets.max();
    crate::weight::log_space(0.01 * big_t, 0.99 * big_t, count)
        .par_iter()
        .map(|&t| monotonicity_residual(&sets, f.alpha, t))
        .collect()
}

/// Whether r(s) = u*(s)/v*(s) is non-decreasing on `s_grid` (1e-8 relative
/// slack), with v = W_nᵅ. Compared in log space.
pub fn ratio_monotone(f: &TestFunction, s_grid: &[f64]) -> Result<bool> {
    Ok(ratio_profile(f, s_grid)?
        .windows(2)
        .all(|w| w[1] >= w[0] + (1.0 - 1e-8f64).ln()))
}

/// log r(s) = log u*(s) − log v*(s) on the grid.
pub fn ratio_profile(f: &TestFunction, s_grid: &[f64]) -> Result<Vec<f64>> {
    let u = f.density()?;
    let v = Density::weight_power(f.n, f.alpha)?;
    let (us, vs) = (LevelSets::new(&u)?, LevelSets::new(&v)?);
    s_grid
        .par_iter()
        .map(|&s| Ok(us.log_rearrangement(s)? - vs.log_rearrangement(s)?))
        .collect()
}

/// Relative residual (αΘ(s)v*(s) + v*′(s))/(αΘ(s)v*(s)) of the rearranged
/// weight, v*′ by 5-point differences in s.
pub fn weight_rearrangement_ode_residual(n: usize, alpha: f64, s: f64) -> Result<f64> {
    let v = Density::weight_power(n, alpha)?;
    let sets = LevelSets::new(&v)?;
    let vol = sets.caps().total_volume();
    let h = 1e-3 * s.min(vol - s);
    let f = |x: f64| sets.rearrangement(x);
    let dv = (f(s - 2.0 * h)? - 8.0 * f(s - h)? + 8.0 * f(s + h)? - f(s + 2.0 * h)?) / (12.0 * h);
    let base = alpha * sets.caps().theta(s)? * f(s)?;
    Ok((base + dv) / base)
}

/// Mean with a standard-error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Running mean and variance (Welford); exact for constant input.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub(crate) fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub(crate) fn estimate(&self, samples: usize) -> MeanEstimate {
        let var = if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        };
        MeanEstimate {
            mean: self.mean,
            stderr: (var / self.count as f64).sqrt(),
            samples,
        }
    }
}

/// Uniform direction on S^{k−1} from normalized Gaussians.
pub(crate) fn random_direction(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Average of g(φ_{x0}(rζ)) over uniform ζ ∈ S^{n−1}: seeded Monte Carlo
/// with antithetic pairs (ζ, −ζ); the standard error is over pair means.
pub fn sphere_mean<G: Fn(&ExtendedPoint<f64>) -> f64>(
    g: G,
    x0: &ExtendedPoint<f64>,
    r: f64,
    samples: usize,
    seed: u64,
) -> MeanEstimate {
    let n = x0.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Welford::default();
    for _ in 0..samples.div_ceil(2).max(1) {
        let z = random_direction(&mut rng, n);
        let plus: Vec<f64> = z.iter().map(|c| r * c).collect();
        let minus: Vec<f64> = z.iter().map(|c| -r * c).collect();
        let a = g(&phi_x0(
            x0,
            &ExtendedPoint::finite(plus).expect("finite sample"),
        ));
        let b = g(&phi_x0(
            x0,
            &ExtendedPoint::finite(minus).expect("finite sample"),
        ));
        acc.push(0.5 * (a + b));
    }
    acc.estimate(2 * acc.count)
}

/// Quadrature for ∫_{−1}^{1} g(u)(1−u²)^{(k−1)/2} du, exact for polynomial g
/// of degree < 2·count − k: Gauss–Legendre when k is odd (the weight is a
/// polynomial), Chebyshev nodes of the second kind when k is even.
pub(crate) fn polar_rule(k: usize, count: usize) -> Vec<(f64, f64)> {
    if k % 2 == 1 {
        gauss_legendre_rule(count)
            .into_iter()
            .map(|(u, w)| (u, w * (1.0 - u * u).powi((k as i32 - 1) / 2)))
            .collect()
    } else {
        let m = count as f64 + 1.0;
        (1..=count)
            .map(|i| {
                let a = i as f64 * std::f64::consts::PI / m;
                let u = a.cos();
                let w = std::f64::consts::PI / m * a.sin().powi(2);
                (u, w * (1.0 - u * u).powi((k as i32 - 2) / 2))
            })
            .collect()
    }
}

/// Radialization g^#(r): the mean of g over |x| = r by a product rule in
/// hyperspherical coordinates. Each polar angle θ_j carries the weight
/// sin^{n−1−j}θ_j and is integrated in u = cos θ_j (see [`polar_rule`]); the
/// azimuth uses the trapezoid rule. Exact for polynomial g of moderate degree.
pub fn radialize<G: Fn(&[f64]) -> f64>(g: G, n: usize, r: f64, samples: usize) -> f64 {
    let samples = samples.max(2);
    let polar = n.saturating_sub(2);
    let rules: Vec<Vec<(f64, f64)>> = (0..polar).map(|j| polar_rule(n - 2 - j, samples)).collect();
    let azimuth = 2 * samples;
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    let mut idx = vec![0usize; polar];
    let mut x = vec![0.0; n];
    loop {
        let mut w = 1.0;
        let mut sin_prod = 1.0;
        for (j, &i) in idx.iter().enumerate() {
            let (u, wt) = rules[j][i];
            w *= wt;
            x[j] = r * sin_prod * u;
            sin_prod *= (1.0 - u * u).sqrt();
        }
        for k in 0..azimuth {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / azimuth as f64;
            x[n - 2] = r * sin_prod * phi.cos();
            x[n - 1] = r * sin_prod * phi.sin();
            total += w * g(&x);
            weight_sum += w;
        }
        // odometer over the polar indices
        let mut j = 0;
        while j < polar {
            idx[j] += 1;
            if idx[j] < samples {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == polar {
            break;
        }
    }
    total / weight_sum
}

/// g(ρ, r) = (4/σ_{n−1})∫_ρ^r (1+s²)^{n−2}s^{1−n} ds, the kernel of the
/// submean identity.
pub fn submean_kernel(n: usize, rho: f64, r: f64) -> Result<f64> {
    let sigma = crate::isoperimetry::sigma::<f64>(n);
    let f = |s: f64| Ok((1.0 + s * s).powi(n as i32 - 2) * s.powi(1 - n as i32));
    Ok(4.0 / sigma * integrate(f, rho, r, &QuadOptions::hybrid(1e-13))?.value)
}

/// f^#(r) − ∫_{B_r} g(|x|, r)Δ_S f dx/(1+|x|²)ⁿ − f(0): zero by the submean
/// identity for C² f. Δ_S f by finite differences, radialized by product
/// quadrature; the ball integral by 32-point Gauss–Legendre in |x|.
pub fn submean_defect<G: Fn(&[f64]) -> f64>(f: G, n: usize, r: f64, samples: usize) -> Result<f64> {
    let sigma = crate::isoperimetry::sigma::<f64>(n);
    let mean = radialize(&f, n, r, samples);
    let rule = gauss_legendre_rule(32);
    let mut ball = 0.0;
    for &(node, w) in &rule {
        let rho = 0.5 * r * (node + 1.0);
        let lap = radialize(|x| laplace_beltrami(&f, x, 1e-4), n, rho, samples);
        let kernel = submean_kernel(n, rho, r)?;
        ball += w * 0.5 * r * sigma * rho.powi(n as i32 - 1) * kernel * lap
            / (1.0 + rho * rho).powi(n as i32);
    }
    Ok(mean - ball - f(&vec![0.0; n]))
}

/// Monte Carlo estimate of m_S{x : W_nᵅ(φ_{x0}(x)) > t}: uniform points on
/// Sⁿ, pulled back by S⁻¹. Equals ρ₀(t) by invariance of m_S.
pub fn translated_distribution_mc(
    n: usize,
    alpha: f64,
    x0: &ExtendedPoint<f64>,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    let v = Density::weight_power(n, alpha)?;
    let vol = crate::isoperimetry::sphere_volume::<f64>(n);
    let log_t = t.ln();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Welford::default();
    for _ in 0..samples {
        let xi = SpherePoint::new(random_direction(&mut rng, n + 1))?;
        let x = stereo_drop(&xi);
        let y = phi_x0(x0, &x);
        let inside = !y.is_infinite() && v.log_value(y.norm())? > log_t;
        acc.push(if inside { vol } else { 0.0 });
    }
    Ok(acc.estimate(samples))
}

/// Number of sign changes of ρ(t) − ρ₀(t) over the levels, and whether the
/// pattern is "non-negative, then non-positive". `f` should be normalized.
pub fn comparison_sign_pattern(f: &TestFunction, levels: &[f64]) -> Result<(usize, bool)> {
    let u = f.density()?;
    let v = Density::weight_power(f.n, f.alpha)?;
    let (us, vs) = (LevelSets::new(&u)?, LevelSets::new(&v)?);
    let diffs = levels
        .par_iter()
        .map(|&t| Ok(us.distribution(t)? - vs.distribution(t)?))
        .collect::<Result<Vec<f64>>>()?;
    let scale = us.caps().total_volume() * 1e-12;
    let signs: Vec<i8> = diffs
        .iter()
        .filter(|d| d.abs() > scale)
        .map(|&d| if d > 0.0 { 1 } else { -1 })
        .collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    let ordered = changes == 0 || (changes == 1 && signs[0] == 1);
    Ok((changes, ordered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::Weight;

    fn weight_density(n: usize, alpha: f64) -> Density {
        Density::weight_power(n, alpha).unwrap()
    }

    #[test]
    fn distribution_of_weight() {
        for n in 2..=4 {
            let v = weight_density(n, 1.0);
            let sets = LevelSets::new(&v).unwrap();
            assert!(sets.is_decreasing());
            assert!((sets.max() - 1.0).abs() < 1e-15);
            let w = Weight::new(n).unwrap();
            for &t in &[0.01, 0.3, 0.9] {
                let r = w.level_radius(1.0, t).unwrap();
                let expect = sets.caps().volume(r);
                assert!((sets.distribution(t).unwrap() - expect).abs() < 1e-12 * expect);
            }
            assert_eq!(sets.distribution(1.0).unwrap(), 0.0);
            assert_eq!(sets.distribution(2.0).unwrap(), 0.0);
            let vol = sets.caps().total_volume();
            assert!((sets.distribution(1e-200).unwrap() - vol).abs() < 1e-6 * vol);
        }
    }

    #[test]
    fn n2_closed_form_distribution() {
        for &alpha in &[0.5, 1.0, 2.0] {
            let v = weight_density(2, alpha);
            let sets = LevelSets::new(&v).unwrap();
            for &t in &[0.05_f64, 0.5, 0.95] {
                let exact = 4.0 * std::f64::consts::PI * (1.0 - t.powf(1.0 / alpha));
                assert!((sets.distribution(t).unwrap() - exact).abs() < 1e-10 * exact);
            }
        }
    }

    #[test]
    fn derivative_matches_coarea() {
        let f = TestFunction::new(3, 2.0, 1.0, vec![(1, 0.12)]).unwrap();
        let d = f.density().unwrap();
        let sets = LevelSets::new(&d).unwrap();
        for &t in &[0.05, 0.4, 0.9] {
            let fd = sets.distribution_derivative(t).unwrap();
            let exact = sets.coarea_derivative(t).unwrap();
            assert!(
                (fd.value - exact).abs() <= fd.error.max(1e-9 * exact.abs()),
                "t={t}: {fd:?} vs {exact}"
            );
        }
        assert!(matches!(
            sets.distribution_derivative(1.0),
            Err(Error::LevelAboveMax { .. })
        ));
        assert!(matches!(
            sets.distribution_derivative(1.0 - 1e-9),
            Err(Error::DegenerateLevel { .. })
        ));
    }

    #[test]
    fn equality_case_residual_vanishes() {
        for n in [3, 4] {
            for alpha in [1.0, 2.0] {
                let f = TestFunction::constant(n, 2.0, alpha).unwrap();
                for r in monotonicity_sweep(&f, 8).unwrap() {
                    assert!(r.residual.abs() <= 1e-6, "n={n} α={alpha}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn one_term_residual_nonpositive() {
        let f = TestFunction::new(3, 2.0, 1.0, vec![(1, 0.05)]).unwrap();
        for r in monotonicity_sweep(&f, 20).unwrap() {
            assert!(r.passes(), "{r:?}");
        }
    }

    #[test]
    fn non_monotone_profile() {
        // log u = 2r² − r⁴: rises to r = 1 then decays; n = 3
        let u = RadialFn {
            n: 3,
            log_value: |r: f64| 2.0 * r * r - r.powi(4),
            log_derivative: |r: f64| 4.0 * r - 4.0 * r.powi(3),
        };
        let sets = LevelSets::new(&u).unwrap();
        assert!(!sets.is_decreasing());
        assert!((sets.argmax() - 1.0).abs() < 1e-12, "{}", sets.argmax());
        assert!((sets.max() - 1f64.exp()).abs() < 1e-12);
        // level t = 1.5: annulus between the two roots of 2r² − r⁴ = ln 1.5
        let l = 1.5f64.ln();
        let (r_in, r_out) = (
            (1.0 - (1.0 - l).sqrt()).sqrt(),
            (1.0 + (1.0 - l).sqrt()).sqrt(),
        );
        let caps = sets.caps();
        let expect = caps.volume(r_out) - caps.volume(r_in);
        assert!((sets.distribution(1.5).unwrap() - expect).abs() < 1e-12 * expect);
        // u(0) = 1 < t: the set is an annulus; below 1 it is a ball
        let ball = sets.distribution(0.5).unwrap();
        let r = (1.0 + (1.0 - 0.5f64.ln()).sqrt()).sqrt();
        assert!((ball - caps.volume(r)).abs() < 1e-12 * ball);
        // rearrangement inverts ρ
        let s = sets.distribution(1.5).unwrap();
        assert!((sets.rearrangement(s).unwrap() - 1.5).abs() < 1e-10);
        let fd = sets.distribution_derivative(1.5).unwrap();
        let exact = sets.coarea_derivative(1.5).unwrap();
        assert!((fd.value - exact).abs() <= fd.error.max(1e-9 * exact.abs()));
    }

    #[test]
    fn rearrangement_paths_agree() {
        let f = TestFunction::new(4, 2.0, 1.0, vec![(1, 0.04), (2, 0.06)]).unwrap();
        let d = f.density().unwrap();
        let sets = LevelSets::new(&d).unwrap();
        let vol = sets.caps().total_volume();
        assert_eq!(sets.rearrangement(0.0).unwrap(), sets.max());
        for &frac in &[1e-4, 0.1, 0.5, 0.8] {
            let s = frac * vol;
            let a = sets.log_rearrangement(s).unwrap();
            let b = sets.log_rearrangement_by_inversion(s).unwrap();
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn table_shape_and_csv() {
        let v = weight_density(3, 1.0);
        let sets = LevelSets::new(&v).unwrap();
        let table = sets.table(40).unwrap();
        assert_eq!(table.levels.len(), 40);
        assert!(table.levels.windows(2).all(|w| w[0] > w[1]));
        assert!(table.rho.windows(2).all(|w| w[0] <= w[1]));
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,rho,rho_prime\n"));
        assert_eq!(text.lines().count(), 41);
        let s = table.rho[20];
        assert!((table.rearrangement(s) / table.levels[20] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_rearrangement_ode() {
        for n in [3, 4] {
            let vol = crate::isoperimetry::sphere_volume::<f64>(n);
            for &frac in &[0.01, 0.3, 0.7] {
                let res = weight_rearrangement_ode_residual(n, 1.0, frac * vol).unwrap();
                assert!(res.abs() < 1e-6, "n={n} s={frac}: {res}");
            }
        }
    }

    #[test]
    fn ratio_is_monotone() {
        let vol = crate::isoperimetry::sphere_volume::<f64>(3);
        let grid: Vec<f64> = (1..40).map(|k| vol * k as f64 / 40.0).collect();
        let f = TestFunction::new(3, 2.0, 1.0, vec![(2, 0.1)]).unwrap();
        assert!(ratio_monotone(&f, &grid).unwrap());
        let one = TestFunction::constant(3, 2.0, 1.0).unwrap();
        assert!(ratio_profile(&one, &grid)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn sphere_means() {
        let x0 = ExtendedPoint::finite(vec![0.3, -0.2, 0.5]).unwrap();
        let c = sphere_mean(|_| 2.5, &x0, 0.7, 100, 1);
        assert_eq!(c.mean, 2.5);
        assert_eq!(c.stderr, 0.0);
        let radial = sphere_mean(|x| x.norm_sq(), &ExtendedPoint::origin(3), 0.7, 64, 2);
        assert!((radial.mean - 0.49).abs() < 1e-14);
        // log F_1 is Δ_S-subharmonic: mean over a sphere around 0 ≥ value at 0
        let p = crate::weight::RadialProfile::new(3, 1, 0.5).unwrap();
        let m = sphere_mean(|x| p.log_value(x.norm()).unwrap(), &x0, 0.4, 2000, 3);
        let center = p.log_value(x0.norm()).unwrap();
        assert!(m.mean >= center - 3.0 * m.stderr, "{m:?} vs {center}");
    }

    #[test]
    fn radialization() {
        for n in 2..=4 {
            assert!(
                (radialize(|x| x.iter().map(|c| c * c).sum::<f64>(), n, 1.3, 12) - 1.69).abs()
                    < 1e-13
            );
            assert!(radialize(|x| x[0], n, 0.8, 12).abs() < 1e-14);
            // x₁² averages to r²/n
            assert!((radialize(|x| x[0] * x[0], n, 2.0, 12) - 4.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn submean_identity_closes() {
        for n in [3, 4] {
            let d = submean_defect(|x| x[0] * x[0] + 0.5 * x[1], n, 0.8, 8).unwrap();
            assert!(d.abs() < 1e-6, "n={n}: {d}");
        }
    }

    #[test]
    fn translated_weight_distribution() {
        let x0 = ExtendedPoint::finite(vec![0.6, 0.0, 0.0]).unwrap();
        let mc = translated_distribution_mc(3, 1.0, &x0, 0.4, 20_000, 9).unwrap();
        let exact = distribution(&weight_density(3, 1.0), 0.4).unwrap();
        assert!(
            (mc.mean - exact).abs() <= 3.0 * mc.stderr,
            "{mc:?} vs {exact}"
        );
    }

    #[test]
    fn sign_pattern() {
        let f = TestFunction::new(3, 2.0, 1.0, vec![(1, 0.12)])
            .unwrap()
            .normalized()
            .unwrap();
        let t_max = f.density().unwrap().max_value().unwrap().min(1.0);
        let levels = crate::weight::log_space(1e-4 * t_max, 0.999 * t_max, 40);
        let (_, ordered) = comparison_sign_pattern(&f, &levels).unwrap();
        assert!(ordered);
    }
}
