//! Norms and functionals of u = |f|ᵖW_nᵅ: concentration on caps and the
//! Faber–Krahn deficit, Wehrl-type integrals ∫G(u) dm_S, the point-evaluation
//! gap, the tail φ(T) = ∫_T^1 ρ₀ and the stability quantities built from the
//! rearrangements u* and v* of u and v = W_nᵅ.
//!
//! Mass conventions: concentration, the deficit and the stability report are
//! ratios or use dm_S/c(α) (unit mass for normalized f). Wehrl values, φ(T),
//! Ψ and the convex stability gap use raw dm_S.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{polar_rule, random_direction, LevelSets, MeanEstimate, Welford};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::geometry::{phi_x0, stereo_drop, ExtendedPoint, SpherePoint};
use crate::isoperimetry::CapGeometry;
use crate::specfun::{integrate, invert_monotone_with, QuadOptions};
use crate::testfam::{integrate_radial, Density, TestFunction};
use crate::weight::{log_space, Weight};

/// Nodes of the polar rule used for averages over spheres |x| = ρ.
const ZONAL_NODES: usize = 32;

/// A convex G: [0, ∞) → R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexSpec {
    /// tˢ, s > 1.
    Power { s: f64 },
    /// t·log t (0 at t = 0).
    Entropy,
    /// G(0) = base, slope `slopes[0]` up to `knots[0]`, `slopes[i]` on
    /// [knots[i−1], knots[i]], the last slope beyond the last knot.
    PiecewiseLinear {
        base: f64,
        knots: Vec<f64>,
        slopes: Vec<f64>,
    },
    /// max{G(t), G(0) − t/ε}, which has bounded derivative near 0.
    Truncated { inner: Box<ConvexSpec>, eps: f64 },
}

impl ConvexSpec {
    pub fn power(s: f64) -> Result<Self> {
        let g = ConvexSpec::Power { s };
        g.validate()?;
        Ok(g)
    }

    pub fn piecewise_linear(base: f64, knots: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        let g = ConvexSpec::PiecewiseLinear {
            base,
            knots,
            slopes,
        };
        g.validate()?;
        Ok(g)
    }

    /// Checks s > 1, ε > 0, and for piecewise-linear specs increasing knots
    /// with non-decreasing slopes.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSpec::Power { s } if !(*s > 1.0 && s.is_finite()) => Err(Error::Parameter(
                format!("power exponent must exceed 1, got {s}"),
            )),
            ConvexSpec::PiecewiseLinear {
                knots,
                slopes,
                base,
            } => {
                if slopes.len() != knots.len() + 1 || !base.is_finite() {
                    return Err(Error::Parameter("need one more slope than knots".into()));
                }
                if knots.first().is_some_and(|&k| !(k > 0.0))
                    || knots.windows(2).any(|w| !(w[1] > w[0]))
                {
                    return Err(Error::Parameter(
                        "knots must be positive and increasing".into(),
                    ));
                }
                if slopes.windows(2).any(|w| !(w[1] >= w[0])) {
                    return Err(Error::Parameter(
                        "slopes must be non-decreasing for convexity".into(),
                    ));
                }
                Ok(())
            }
            ConvexSpec::Truncated { inner, eps } => {
                if !(*eps > 0.0) {
                    return Err(Error::Parameter(format!(
                        "truncation needs ε > 0, got {eps}"
                    )));
                }
                inner.validate()
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            ConvexSpec::Power { s } => t.powf(*s),
            ConvexSpec::Entropy => {
                if t == 0.0 {
                    0.0
                } else {
                    t * t.ln()
                }
            }
            ConvexSpec::PiecewiseLinear {
                base,
                knots,
                slopes,
            } => {
                let mut g = *base;
                let mut left = 0.0;
                for (i, &k) in knots.iter().enumerate() {
                    if t <= k {
                        return g + slopes[i] * (t - left);
                    }
                    g += slopes[i] * (k - left);
                    left = k;
                }
                g + slopes[knots.len()] * (t - left)
            }
            ConvexSpec::Truncated { inner, eps } => inner.value(t).max(inner.value(0.0) - t / eps),
        }
    }

    /// Right derivative G′(t⁺).
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            ConvexSpec::Power { s } => s * t.powf(s - 1.0),
            ConvexSpec::Entropy => t.ln() + 1.0,
            ConvexSpec::PiecewiseLinear { knots, slopes, .. } => {
                slopes[knots.partition_point(|&k| k <= t)]
            }
            ConvexSpec::Truncated { inner, eps } => {
                let (a, b) = (inner.value(t), inner.value(0.0) - t / eps);
                if a > b {
                    inner.derivative(t)
                } else if a < b {
                    -1.0 / eps
                } else {
                    inner.derivative(t).max(-1.0 / eps)
                }
            }
        }
    }

    /// Left derivative G′₋(t); differs from [`Self::derivative`] only at knots.
    pub fn left_derivative(&self, t: f64) -> f64 {
        match self {
            ConvexSpec::PiecewiseLinear { knots, slopes, .. } => {
                slopes[knots.partition_point(|&k| k < t)]
            }
            ConvexSpec::Truncated { inner, eps } => {
                let (a, b) = (inner.value(t), inner.value(0.0) - t / eps);
                if a > b {
                    inner.left_derivative(t)
                } else if a < b {
                    -1.0 / eps
                } else {
                    inner.left_derivative(t).min(-1.0 / eps)
                }
            }
            _ => self.derivative(t),
        }
    }

    /// Points where G′ may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ConvexSpec::PiecewiseLinear { knots, .. } => knots.clone(),
            ConvexSpec::Truncated { inner, .. } => inner.breakpoints(),
            _ => Vec::new(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ConvexSpec::Power { s } => format!("t^{s}"),
            ConvexSpec::Entropy => "t log t".into(),
            ConvexSpec::PiecewiseLinear { knots, .. } => {
                format!("piecewise-linear({} knots)", knots.len())
            }
            ConvexSpec::Truncated { inner, eps } => {
                format!("{} truncated at eps={eps}", inner.label())
            }
        }
    }
}

/// Ω = φ_{x0}(B_R) with m_S(Ω) = `measure`: the cap of that measure centred
/// at x0.
#[derive(Debug, Clone, PartialEq)]
pub struct Cap {
    pub center: ExtendedPoint<f64>,
    pub measure: f64,
}

impl Cap {
    pub fn new(center: ExtendedPoint<f64>, measure: f64) -> Self {
        Self { center, measure }
    }

    /// Centre at distance `r` along the first axis, measure `fraction`·vol(Sⁿ).
    pub fn on_axis(n: usize, r: f64, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Parameter(format!(
                "cap fraction must lie in (0, 1), got {fraction}"
            )));
        }
        let vol = crate::isoperimetry::sphere_volume::<f64>(n);
        Ok(Self {
            center: ExtendedPoint::on_axis(n, r),
            measure: fraction * vol,
        })
    }

    /// The centred cap of the same measure.
    pub fn centered(&self) -> Self {
        Self {
            center: ExtendedPoint::origin(self.center.dim()),
            measure: self.measure,
        }
    }

    /// Radius R of the ball B_R with φ_{x0}(B_R) = Ω.
    pub fn radius(&self, caps: &CapGeometry<f64>) -> Result<f64> {
        caps.radius_for_volume(self.measure)
    }

    /// Membership test |φ_{x0}(x)| < R.
    pub fn contains(&self, x: &ExtendedPoint<f64>, radius: f64) -> bool {
        let y = phi_x0(&self.center, x);
        !y.is_infinite() && y.norm() < radius
    }
}

/// Mean over ζ ∈ S^{n−1} of g(φ_{x0}(ρζ)), as a 1-D polar rule in the angle
/// between ζ and x0 (the integrand depends on nothing else). `g` receives
/// the image point; infinite images are passed as such.
fn zonal_mean(
    g: &impl Fn(&ExtendedPoint<f64>) -> Result<f64>,
    x0: &ExtendedPoint<f64>,
    rho: f64,
    rule: &[(f64, f64)],
) -> Result<f64> {
    let n = x0.dim();
    if x0.is_origin() || x0.is_infinite() {
        return g(&phi_x0(x0, &ExtendedPoint::on_axis(n, rho)));
    }
    let r0 = x0.norm();
    let axis: Vec<f64> = x0.coords().iter().map(|c| c / r0).collect();
    // unit vector orthogonal to the axis, from the coordinate it least uses
    let j = (0..n)
        .min_by(|&a, &b| axis[a].abs().total_cmp(&axis[b].abs()))
        .expect("n ≥ 1");
    let mut perp: Vec<f64> = axis.iter().map(|&a| -a * axis[j]).collect();
    perp[j] += 1.0;
    let pn = perp.iter().map(|c| c * c).sum::<f64>().sqrt();
    perp.iter_mut().for_each(|c| *c /= pn);
    let (mut total, mut wsum) = (0.0, 0.0);
    for &(u, w) in rule {
        let s = (1.0 - u * u).max(0.0).sqrt();
        let x: Vec<f64> = axis
            .iter()
            .zip(&perp)
            .map(|(&a, &p)| rho * (u * a + s * p))
            .collect();
        total += w * g(&phi_x0(x0, &ExtendedPoint::finite(x)?))?;
        wsum += w;
    }
    Ok(total / wsum)
}

fn point_value(u: &Density, y: &ExtendedPoint<f64>) -> Result<f64> {
    if y.is_infinite() {
        Ok(0.0)
    } else {
        u.value(y.norm())
    }
}

/// ∫_Ω u dm_S (raw) over a cap. Centred caps are a radial integral; other
/// centres use invariance of m_S under φ_{x0}: ∫_{B_R} u∘φ_{x0} dm_S, with
/// the sphere averages done by [`zonal_mean`].
pub fn cap_mass(u: &Density, cap: &Cap) -> Result<f64> {
    let caps = u.caps();
    let radius = cap.radius(caps)?;
    if cap.center.is_origin() {
        return integrate_radial(|r| Ok(caps.volume_derivative(r) * u.value(r)?), 0.0, radius);
    }
    let rule = polar_rule(u.n().saturating_sub(2), ZONAL_NODES);
    let g = |y: &ExtendedPoint<f64>| point_value(u, y);
    integrate_radial(
        |rho| Ok(caps.volume_derivative(rho) * zonal_mean(&g, &cap.center, rho, &rule)?),
        0.0,
        radius,
    )
}

/// ‖f‖_{α,p} = ((1/c(α))∫|f|ᵖW_nᵅ dm_S)^{1/p}.
pub fn bergman_norm(f: &TestFunction) -> Result<f64> {
    let u = f.density()?;
    let c = u.weight().normalization(f.alpha)?;
    Ok((u.mass()? / c).powf(1.0 / f.p))
}

/// C_Ω(f) = ∫_Ω u dm_S / ∫ u dm_S, i.e. (1/c(α))∫_Ω u dm_S/‖f‖ᵖ.
pub fn concentration(f: &TestFunction, cap: &Cap) -> Result<f64> {
    let u = f.density()?;
    Ok(cap_mass(&u, cap)? / u.mass()?)
}

/// C_B(1) for the centred ball B of measure s.
pub fn extremal_concentration(n: usize, alpha: f64, measure: f64) -> Result<f64> {
    let v = Density::weight_power(n, alpha)?;
    Ok(cap_mass(&v, &Cap::new(ExtendedPoint::origin(n), measure))? / v.mass()?)
}

/// δ(f; Ω, α) = 1 − C_Ω(f)/C_B(1).
pub fn faber_krahn_deficit(f: &TestFunction, cap: &Cap) -> Result<f64> {
    Ok(1.0 - concentration(f, cap)? / extremal_concentration(f.n, f.alpha, cap.measure)?)
}

/// Monte Carlo value of C_Ω(I_{x0}) for Ω = φ_{x0}(B): uniform points on Sⁿ,
/// integrand vol·1{|φ_{x0}(x)| < R}·W_nᵅ(φ_{x0}(x))/c(α). Should agree with
/// C_B(1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub estimate: MeanEstimate,
    pub exact: f64,
}

impl IdentityCheck {
    /// |estimate − exact| in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.estimate.mean - self.exact).abs() / self.estimate.stderr
    }
}

pub fn extremizer_identity(
    n: usize,
    alpha: f64,
    cap: &Cap,
    samples: usize,
    seed: u64,
) -> Result<IdentityCheck> {
    let v = Density::weight_power(n, alpha)?;
    let c = v.mass()?;
    let exact = cap_mass(&v, &cap.centered())? / c;
    let radius = cap.radius(v.caps())?;
    let vol = v.caps().total_volume();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Welford::default();
    for _ in 0..samples {
        let x = stereo_drop(&SpherePoint::new(random_direction(&mut rng, n + 1))?);
        let y = phi_x0(&cap.center, &x);
        let inside = !y.is_infinite() && y.norm() < radius;
        acc.push(if inside {
            vol * v.value(y.norm())? / c
        } else {
            0.0
        });
    }
    Ok(IdentityCheck {
        estimate: acc.estimate(samples),
        exact,
    })
}

/// Off-centre cap against the super-level set of equal measure:
/// (∫_Ω u, ∫_{A_t} u) with m_S(A_t) = m_S(Ω), raw dm_S. The first never
/// exceeds the second.
pub fn bathtub_pair(f: &TestFunction, cap: &Cap) -> Result<(f64, f64)> {
    let u = f.density()?;
    let sets = LevelSets::new(&u)?;
    Ok((cap_mass(&u, cap)?, top_mass(&u, &sets, cap.measure)?))
}

/// ∫₀ˢ u*(σ) dσ = ∫_{A_t} u dm_S with m_S(A_t) = s.
fn top_mass(u: &Density, sets: &LevelSets<Density>, s: f64) -> Result<f64> {
    let caps = u.caps();
    if s <= 0.0 {
        return Ok(0.0);
    }
    if s >= caps.total_volume() {
        return u.mass();
    }
    if sets.is_decreasing() {
        let r = caps.radius_for_volume(s)?;
        return integrate_radial(|x| Ok(caps.volume_derivative(x) * u.value(x)?), 0.0, r);
    }
    let t = sets.rearrangement(s)?;
    let tail = integrate(
        |tau| sets.distribution(tau),
        t,
        sets.max(),
        &QuadOptions::relative(1e-11),
    )?
    .value;
    Ok(t * s + tail)
}

/// ∫ G(|f|ᵖW_nᵅ) dm_S (raw) for f rescaled to ‖f‖_{α,p} = 1.
pub fn wehrl_value(f: &TestFunction, g: &ConvexSpec) -> Result<f64> {
    let u = f.normalized()?.density()?;
    u.integrate_against_measure(|_, t| g.value(t))
}

/// ∫ G(W_nᵅ) dm_S, the value at f ≡ 1.
pub fn wehrl_extremal(n: usize, alpha: f64, g: &ConvexSpec) -> Result<f64> {
    Density::weight_power(n, alpha)?.integrate_against_measure(|_, t| g.value(t))
}

/// ∫₀^{vol} G(u*(s)) ds for normalized f: the same value as
/// [`wehrl_value`], computed from the rearrangement.
pub fn wehrl_by_rearrangement(f: &TestFunction, g: &ConvexSpec) -> Result<f64> {
    let u = f.normalized()?.density()?;
    let sets = LevelSets::new(&u)?;
    let vol = u.caps().total_volume();
    let opts = QuadOptions::hybrid(1e-11);
    let h = |s: f64| Ok(g.value(sets.rearrangement(s)?));
    let mut total = 0.0;
    let cuts = [0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0];
    for w in cuts.windows(2) {
        total += integrate(h, w[0] * vol, w[1] * vol, &opts)?.value;
    }
    Ok(total)
}

/// ‖f‖_{α,p} − ‖f‖_{β,q}; non-negative when p/α = q/β and p ≤ q.
pub fn norm_monotonicity_gap(f: &TestFunction, beta: f64, q: f64) -> Result<f64> {
    let ratio_gap = (f.p / f.alpha - q / beta).abs();
    if ratio_gap > 1e-12 * (f.p / f.alpha) {
        return Err(Error::Parameter(format!(
            "need p/α = q/β, got {}/{} and {q}/{beta}",
            f.p, f.alpha
        )));
    }
    if q < f.p || beta < f.alpha {
        return Err(Error::Parameter(format!(
            "need p ≤ q and α ≤ β, got p={}, q={q}",
            f.p
        )));
    }
    Ok(bergman_norm(f)? - bergman_norm(&f.with_exponents(q, beta)?)?)
}

/// ‖f‖ᵖ − |f(x0)|ᵖW_nᵅ(x0).
pub fn point_eval_gap(f: &TestFunction, x0: &ExtendedPoint<f64>) -> Result<f64> {
    let u = f.density()?;
    let norm_p = u.mass()? / u.weight().normalization(f.alpha)?;
    Ok(norm_p - point_value(&u, x0)?)
}

/// ∫_T^1 h(τ)ρ₀(τ) dτ, ρ₀(τ) = m_S{W_nᵅ > τ}, through τ = W_nᵅ(r):
/// ∫₀^{r_T} h(W_nᵅ(r))·V(r)·α(−k(r))W_nᵅ(r) dr with k = (log W_n)′.
/// `breaks` are levels where h may jump.
fn rho0_moment(
    weight: &Weight,
    alpha: f64,
    t: f64,
    h: impl Fn(f64) -> f64,
    breaks: &[f64],
) -> Result<f64> {
    if t >= 1.0 {
        return Ok(0.0);
    }
    let caps = CapGeometry::<f64>::new(weight.n())?;
    let integrand = |r: f64| {
        let w = (alpha * weight.log_value(r)?).exp();
        let k = weight.profile().derivative(r)?;
        Ok(h(w) * caps.volume(r) * alpha * (-k) * w)
    };
    let top = if t > 0.0 {
        weight.level_radius(alpha, t)?
    } else {
        f64::INFINITY
    };
    let mut cuts = vec![0.0];
    let mut inner: Vec<f64> = breaks
        .iter()
        .filter(|&&b| b > t && b < 1.0)
        .map(|&b| weight.level_radius(alpha, b))
        .collect::<Result<_>>()?;
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(top);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += if w[1].is_infinite() {
            integrate_radial(integrand, w[0], w[1])?
        } else {
            integrate(integrand, w[0], w[1], &QuadOptions::relative(1e-12))?.value
        };
    }
    Ok(total)
}

/// φ(T) = ∫_T^1 ρ₀(τ) dτ (raw dm_S). φ(0) = c(α).
pub fn phi_tail(n: usize, alpha: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Parameter(format!("α must be positive, got {alpha}")));
    }
    rho0_moment(&Weight::new(n)?, alpha, t, |_| 1.0, &[])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiPoint {
    #[serde(rename = "T")]
    pub t: f64,
    pub phi: f64,
    pub log1m_t: f64,
    pub log_phi: f64,
}

/// φ(T) at `count` levels with 1 − T log-spaced in [1 − t_hi, 1 − t_lo],
/// and the least-squares slope of log φ against log(1 − T).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiFit {
    pub n: usize,
    pub alpha: f64,
    pub points: Vec<PhiPoint>,
    pub fit: LinearFit,
}

/// Default fitting window for the exponent of φ near T = 1. On [0.9, 0.999]
/// the O(1−T) correction still tilts the slope by up to 0.16 (n = 5, α = 0.5).
pub const PHI_FIT_RANGE: (f64, f64) = (0.99, 0.9999);

pub fn phi_fit(n: usize, alpha: f64, t_lo: f64, t_hi: f64, count: usize) -> Result<PhiFit> {
    if !(0.0 < t_lo && t_lo < t_hi && t_hi < 1.0 && count >= 2) {
        return Err(Error::Parameter(format!(
            "bad fit window [{t_lo}, {t_hi}] with {count} points"
        )));
    }
    let weight = Weight::new(n)?;
    let points = log_space(1.0 - t_hi, 1.0 - t_lo, count)
        .par_iter()
        .map(|&gap| {
            let t = 1.0 - gap;
            let phi = rho0_moment(&weight, alpha, t, |_| 1.0, &[])?;
            Ok(PhiPoint {
                t,
                phi,
                log1m_t: gap.ln(),
                log_phi: phi.ln(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.log1m_t).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.log_phi).collect();
    let fit = linear_fit(&xs, &ys).ok_or_else(|| Error::Domain("degenerate φ fit".into()))?;
    Ok(PhiFit {
        n,
        alpha,
        points,
        fit,
    })
}

/// Stability quantities for a normalized f and a measure s0; all masses
/// except `phi_t` are divided by c(α).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub label: String,
    pub s0: f64,
    pub c_alpha: f64,
    /// T = max u ≤ 1.
    #[serde(rename = "T")]
    pub t_max: f64,
    /// Smallest s > 0 with u*(s) = v*(s).
    pub s_star: f64,
    pub t_star: f64,
    /// 1 − ∫₀^{s0}u*/∫₀^{s0}v*.
    pub delta_s0: f64,
    /// max{1, A/(1 − A)}, A = (1/c(α))∫₀^{s0}v*.
    pub f_s0: f64,
    /// (1/c(α))∫₀^{s*}(v* − u*).
    pub gap_integral: f64,
    /// δ_{s0}·F(s0).
    pub deficit_bound: f64,
    /// φ(T), raw dm_S; bounded by c(α)·gap_integral.
    pub phi_t: f64,
    /// Faber–Krahn deficit of the centred cap of measure s0.
    pub cap_deficit: f64,
    /// ‖|f| − I_0‖² = 2 − 2⟨|f|, 1⟩ (p = 2 only).
    pub distance_sq: Option<f64>,
    /// 2(1 − √T).
    pub distance_bound: f64,
    /// Slope of log φ against log(1 − T) on the default window.
    pub fitted_exponent: f64,
}

/// Slack on the inequalities checked by [`StabilityReport::violations`].
pub const STABILITY_SLACK: f64 = 1e-6;

impl StabilityReport {
    /// Names of the inequalities in the chain that fail at [`STABILITY_SLACK`].
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.gap_integral > self.deficit_bound + STABILITY_SLACK {
            out.push("gap integral exceeds delta_s0 * F(s0)");
        }
        if self.phi_t > self.c_alpha * self.gap_integral + STABILITY_SLACK {
            out.push("phi(T) exceeds the gap integral");
        }
        if self.delta_s0 > self.cap_deficit + STABILITY_SLACK {
            out.push("delta_s0 exceeds the cap deficit");
        }
        if self.delta_s0 < -1e-8 {
            out.push("delta_s0 negative");
        }
        if self.t_max > 1.0 + 1e-9 {
            out.push("T exceeds 1");
        }
        if let Some(d) = self.distance_sq {
            if d > self.distance_bound + STABILITY_SLACK {
                out.push("extremizer distance exceeds 2(1 - sqrt T)");
            }
        }
        out
    }
}

/// s* with u*(s*) = v*(s*), solved in the radius r of the centred cap of
/// measure s. [`Error::NoCrossing`] when u* = v*.
fn crossing_measure(
    us: &LevelSets<Density>,
    vs: &LevelSets<Density>,
    caps: &CapGeometry<f64>,
) -> Result<f64> {
    let g = |r: f64| -> Result<f64> {
        let s = caps.volume(r);
        Ok(us.log_rearrangement(s)? - vs.log_rearrangement(s)?)
    };
    let lo = 1e-8;
    if g(lo)? >= 0.0 {
        return Err(Error::NoCrossing);
    }
    let mut hi = 1.0;
    while g(hi)? < 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::NoCrossing);
        }
    }
    let r = invert_monotone_with(g, 0.0, lo, hi, 1e-13)?;
    Ok(caps.volume(r))
}

/// Builds the report for f (rescaled to unit norm) and measure s0.
pub fn stability_report(f: &TestFunction, s0: f64) -> Result<StabilityReport> {
    let f = f.normalized()?;
    let u = f.density()?;
    let v = Density::weight_power(f.n, f.alpha)?;
    let caps = u.caps();
    let vol = caps.total_volume();
    if !(s0 > 0.0 && s0 < vol) {
        return Err(Error::Parameter(format!(
            "s0 must lie in (0, {vol}), got {s0}"
        )));
    }
    let c = v.mass()?;
    let (us, vs) = (LevelSets::new(&u)?, LevelSets::new(&v)?);
    let t_max = us.max();
    let top_v0 = top_mass(&v, &vs, s0)?;
    let top_u0 = top_mass(&u, &us, s0)?;
    let delta_s0 = 1.0 - top_u0 / top_v0;
    let a = top_v0 / c;
    let f_s0 = (a / (1.0 - a)).max(1.0);
    let (s_star, t_star, gap_integral) = match crossing_measure(&us, &vs, caps) {
        Ok(s) => {
            let gap = (top_mass(&v, &vs, s)? - top_mass(&u, &us, s)?) / c;
            (s, vs.rearrangement(s)?, gap)
        }
        Err(Error::NoCrossing) => (0.0, 1.0, 0.0),
        Err(e) => return Err(e),
    };
    let phi_t = phi_tail(f.n, f.alpha, t_max)?;
    let cap_deficit = 1.0 - top_u0 / top_v0.max(f64::MIN_POSITIVE);
    let cap_deficit = if us.is_decreasing() {
        cap_deficit
    } else {
        faber_krahn_deficit(&f, &Cap::new(ExtendedPoint::origin(f.n), s0))?
    };
    let distance_sq = if f.p == 2.0 {
        Some(extremizer_distance_sq(&f, &ExtendedPoint::origin(f.n))?)
    } else {
        None
    };
    let fit = phi_fit(f.n, f.alpha, PHI_FIT_RANGE.0, PHI_FIT_RANGE.1, 16)?;
    Ok(StabilityReport {
        label: f.label(),
        s0,
        c_alpha: c,
        t_max,
        s_star,
        t_star,
        delta_s0,
        f_s0,
        gap_integral,
        deficit_bound: delta_s0 * f_s0,
        phi_t,
        cap_deficit,
        distance_sq,
        distance_bound: 2.0 * (1.0 - t_max.min(1.0).sqrt()),
        fitted_exponent: fit.fit.slope,
    })
}

/// ‖|f| − I_{x0}‖²_{α,2} = 2 − 2⟨|f|, I_{x0}⟩ for p = 2, f rescaled to unit
/// norm, with ⟨|f|, I_{x0}⟩ = (1/c(α))∫|f|·W_n^{α/2}∘φ_{x0}·W_n^{α/2} dm_S.
pub fn extremizer_distance_sq(f: &TestFunction, x0: &ExtendedPoint<f64>) -> Result<f64> {
    if f.p != 2.0 {
        return Err(Error::Parameter(format!(
            "the extremizer distance needs p = 2, got {}",
            f.p
        )));
    }
    let f = f.normalized()?;
    let u = f.density()?;
    let weight = u.weight();
    let c = weight.normalization(f.alpha)?;
    let half = 0.5 * f.alpha;
    let translate = |y: &ExtendedPoint<f64>| -> Result<f64> {
        if y.is_infinite() {
            Ok(0.0)
        } else {
            Ok((half * weight.log_value(y.norm())?).exp())
        }
    };
    let rule = polar_rule(f.n.saturating_sub(2), ZONAL_NODES);
    let caps = u.caps();
    let pairing = integrate_radial(
        |rho| {
            let mean = zonal_mean(&translate, x0, rho, &rule)?;
            Ok(caps.volume_derivative(rho) * (0.5 * u.log_value(rho)?).exp() * mean)
        },
        0.0,
        f64::INFINITY,
    )?;
    Ok(2.0 - 2.0 * pairing / c)
}

/// Default centres |x0| for the distance minimization.
pub const DISTANCE_CENTERS: [f64; 5] = [0.0, 0.25, 0.5, 1.0, 2.0];

/// min over |x0| ∈ [`DISTANCE_CENTERS`] of ‖|f| − I_{x0}‖ (not squared).
pub fn min_extremizer_distance(f: &TestFunction) -> Result<f64> {
    let d = DISTANCE_CENTERS
        .par_iter()
        .map(|&r| extremizer_distance_sq(f, &ExtendedPoint::on_axis(f.n, r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(d.into_iter().fold(f64::INFINITY, f64::min).max(0.0).sqrt())
}

/// Ψ(t) = tρ(t) + ∫_t^T ρ − βρ₀(β) − ∫_β^1 ρ₀ with ρ₀(β) = ρ(t), for f
/// rescaled to unit norm (raw dm_S). Non-positive on (0, T).
pub fn psi(f: &TestFunction, levels: &[f64]) -> Result<Vec<f64>> {
    let f = f.normalized()?;
    let u = f.density()?;
    let v = Density::weight_power(f.n, f.alpha)?;
    let (us, vs) = (LevelSets::new(&u)?, LevelSets::new(&v)?);
    let big_t = us.max();
    let weight = v.weight();
    levels
        .par_iter()
        .map(|&t| {
            if !(t > 0.0 && t < big_t) {
                return Err(Error::LevelAboveMax {
                    level: t,
                    max: big_t,
                });
            }
            let rho = us.distribution(t)?;
            let tail = integrate(
                |tau| us.distribution(tau),
                t,
                big_t,
                &QuadOptions::relative(1e-11),
            )?
            .value;
            let beta = vs.rearrangement(rho)?;
            let tail0 = rho0_moment(weight, f.alpha, beta, |_| 1.0, &[])?;
            Ok(t * rho + tail - beta * rho - tail0)
        })
        .collect()
}

/// (∫u^q dm_S, ∫₀^T q t^{q−1}ρ(t) dt) for a radial density.
pub fn layer_cake(u: &Density, q: f64) -> Result<(f64, f64)> {
    let direct = u.integrate_against_measure(|_, x| x.powf(q))?;
    let sets = LevelSets::new(u)?;
    let big_t = sets.max();
    let opts = QuadOptions::relative(1e-11);
    let cake = integrate(
        |t| Ok(q * t.powf(q - 1.0) * sets.distribution(t)?),
        0.0,
        big_t,
        &opts,
    )?
    .value;
    Ok((direct, cake))
}

/// (lhs, rhs) of the convex stability inequality for f rescaled to unit
/// norm: lhs = ∫_T^1 (G′(t) − G′₋(T))ρ₀(t) dt, rhs = ∫G(W_nᵅ) − ∫G(u), both
/// with raw dm_S.
pub fn convex_stability_gap(f: &TestFunction, g: &ConvexSpec) -> Result<(f64, f64)> {
    let f = f.normalized()?;
    let u = f.density()?;
    let big_t = u.max_value()?;
    let slope_t = g.left_derivative(big_t);
    let lhs = rho0_moment(
        u.weight(),
        f.alpha,
        big_t,
        |t| g.derivative(t) - slope_t,
        &g.breakpoints(),
    )?;
    let rhs = wehrl_extremal(f.n, f.alpha, g)? - u.integrate_against_measure(|_, t| g.value(t))?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::testfam::default_terms;
    use std::f64::consts::PI;

    fn tf(n: usize, terms: Vec<(u32, f64)>) -> TestFunction {
        TestFunction::new(n, 2.0, 1.0, terms).unwrap()
    }

    #[test]
    fn convex_spec_derivatives() {
        let g = ConvexSpec::piecewise_linear(0.5, vec![0.2, 0.6], vec![-1.0, 0.5, 3.0]).unwrap();
        assert!((g.value(0.2) - 0.3).abs() < 1e-15);
        assert!((g.value(1.0) - (0.3 + 0.2 + 1.2)).abs() < 1e-15);
        assert_eq!(g.derivative(0.2), 0.5);
        assert_eq!(g.left_derivative(0.2), -1.0);
        assert_eq!(g.left_derivative(0.4), 0.5);
        assert!(ConvexSpec::piecewise_linear(0.0, vec![0.5], vec![1.0, 0.0]).is_err());
        assert!(ConvexSpec::power(1.0).is_err());
        let e = ConvexSpec::Entropy;
        assert_eq!(e.value(0.0), 0.0);
        assert!((e.derivative(1.0) - 1.0).abs() < 1e-15);
        let tr = ConvexSpec::Truncated {
            inner: Box::new(ConvexSpec::Entropy),
            eps: 0.5,
        };
        assert_eq!(tr.derivative(1e-6), -2.0);
        assert!(tr.value(0.3) >= e.value(0.3));
    }

    #[test]
    fn norm_of_constant_is_one() {
        for n in [3, 4] {
            for &(p, a) in &[(2.0, 1.0), (1.0, 0.5), (3.0, 2.0)] {
                let f = TestFunction::constant(n, p, a).unwrap();
                assert!((bergman_norm(&f).unwrap() - 1.0).abs() < 1e-11);
            }
        }
    }

    /// Nodes, weights and log-profiles (log W_n, log F_{m,c}) of a composite
    /// 64-point Gauss–Legendre rule on [0, r_max], the profiles accumulated
    /// panel by panel from the integrated-kernel oracle.
    fn oracle_nodes(
        n: usize,
        m: u32,
        c: f64,
        r_max: f64,
        panels: usize,
    ) -> Vec<(f64, f64, f64, f64)> {
        let outer = oracle::legendre_rule(64);
        let inner = oracle::legendre_rule(24);
        let piece = |m: u32, c: f64, a: f64, b: f64| -> f64 {
            inner
                .iter()
                .map(|&(x, w)| w * oracle::kernel(n, m, c, 0.5 * (a + b) + 0.5 * (b - a) * x))
                .sum::<f64>()
                * 0.5
                * (b - a)
        };
        let h = r_max / panels as f64;
        let (mut cw, mut cf) = (0.0, 0.0);
        let mut out = Vec::new();
        for j in 0..panels {
            let (a, b) = (h * j as f64, h * (j + 1) as f64);
            for &(x, w) in &outer {
                let r = 0.5 * (a + b) + 0.5 * (b - a) * x;
                out.push((
                    r,
                    w * 0.5 * (b - a),
                    cw + piece(0, -1.0, a, r),
                    cf + piece(m, c, a, r),
                ));
            }
            cw += piece(0, -1.0, a, b);
            cf += piece(m, c, a, b);
        }
        out
    }

    #[test]
    fn norm_golden_against_fixed_order_oracle() {
        // beyond r = 60 the weight is below e^{-39}
        let (n, c) = (3, 0.05);
        let dv = |r: f64| 32.0 * PI * r * r / (1.0 + r * r).powi(3);
        let nodes = oracle_nodes(n, 1, c, 60.0, 120);
        let num: f64 = nodes
            .iter()
            .map(|&(r, w, lw, lf)| w * dv(r) * (lw + 2.0 * lf).exp())
            .sum();
        let den: f64 = nodes
            .iter()
            .map(|&(r, w, lw, _)| w * dv(r) * lw.exp())
            .sum();
        let oracle_norm = (num / den).sqrt();
        let got = bergman_norm(&tf(n, vec![(1, c)])).unwrap();
        assert!(
            (got - oracle_norm).abs() < 1e-9 * oracle_norm,
            "{got:.16} vs {oracle_norm:.16}"
        );
        assert!((got - NORM_N3_C005).abs() < 1e-9 * got, "{got:.16}");
    }

    /// ‖f‖_{1,2} for n = 3, f = F_1 with c = 0.05, frozen from the oracle above.
    const NORM_N3_C005: f64 = 1.0177885046195183;

    #[test]
    fn concentration_limits() {
        let f = tf(3, vec![(1, 0.12)]);
        let vol = crate::isoperimetry::sphere_volume::<f64>(3);
        let whole =
            concentration(&f, &Cap::new(ExtendedPoint::origin(3), vol * (1.0 - 1e-12))).unwrap();
        assert!((whole - 1.0).abs() < 1e-9);
        let one = TestFunction::constant(3, 2.0, 1.0).unwrap();
        let cap = Cap::on_axis(3, 0.0, 0.3).unwrap();
        assert!(faber_krahn_deficit(&one, &cap).unwrap().abs() < 1e-11);
    }

    #[test]
    fn zonal_cap_mass_matches_centered_for_constant_mass() {
        // u ≡ 1 on the sphere: every cap of measure s has mass s.
        let v = Density::weight_power(3, 1e-300).unwrap();
        for &r in &[0.3, 1.0, 4.0] {
            let cap = Cap::on_axis(3, r, 0.2).unwrap();
            let m = cap_mass(&v, &cap).unwrap();
            assert!(
                (m - cap.measure).abs() < 1e-10 * cap.measure,
                "{m} vs {}",
                cap.measure
            );
        }
    }

    #[test]
    fn off_center_caps_have_positive_deficit() {
        let f = tf(4, vec![(1, 0.04), (2, 0.06)]);
        for &r in &[0.0, 0.5, 2.0] {
            let cap = Cap::on_axis(4, r, 0.25).unwrap();
            let d = faber_krahn_deficit(&f, &cap).unwrap();
            assert!(d >= -1e-8, "r={r}: {d}");
        }
        let one = TestFunction::constant(4, 2.0, 1.0).unwrap();
        let d = faber_krahn_deficit(&one, &Cap::on_axis(4, 1.0, 0.25).unwrap()).unwrap();
        assert!(d > 1e-3);
    }

    #[test]
    fn extremizer_identity_within_three_sigma() {
        let cap = Cap::on_axis(3, 0.7, 0.2).unwrap();
        let check = extremizer_identity(3, 1.0, &cap, 40_000, 7).unwrap();
        assert!(check.z_score() < 3.0, "{check:?}");
    }

    #[test]
    fn wehrl_linear_and_layer_cake() {
        let f = tf(3, vec![(1, 0.12)]);
        let c = crate::weight::normalization_c(3, 1.0).unwrap();
        let lin = ConvexSpec::piecewise_linear(0.0, vec![], vec![1.0]).unwrap();
        assert!((wehrl_value(&f, &lin).unwrap() - c).abs() < 1e-8);
        let sq = ConvexSpec::power(2.0).unwrap();
        let a = wehrl_value(&f, &sq).unwrap();
        let b = wehrl_by_rearrangement(&f, &sq).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        assert!(a <= wehrl_extremal(3, 1.0, &sq).unwrap() + 1e-8);
    }

    #[test]
    fn norm_monotonicity() {
        let f = tf(3, vec![(1, 0.05)]);
        assert!(norm_monotonicity_gap(&f, 2.0, 4.0).unwrap() >= -1e-8);
        assert_eq!(norm_monotonicity_gap(&f, 1.0, 2.0).unwrap(), 0.0);
        assert!(norm_monotonicity_gap(&f, 2.0, 3.0).is_err());
    }

    #[test]
    fn point_evaluation() {
        let one = TestFunction::constant(3, 2.0, 1.0).unwrap();
        assert!(
            point_eval_gap(&one, &ExtendedPoint::origin(3))
                .unwrap()
                .abs()
                < 1e-11
        );
        let f = tf(3, vec![(2, 0.1)]).with_scale(3.0);
        assert!(point_eval_gap(&f, &ExtendedPoint::infinity(3)).unwrap() > 0.0);
        for &r in &[0.0, 0.5, 2.0] {
            assert!(point_eval_gap(&f, &ExtendedPoint::on_axis(3, r)).unwrap() >= -1e-8);
        }
    }

    #[test]
    fn phi_tail_n2_closed_form_and_limits() {
        for &alpha in &[0.5, 1.0, 2.0] {
            for &t in &[0.1_f64, 0.5, 0.95] {
                let exact = 4.0
                    * PI
                    * ((1.0 - t) - alpha / (alpha + 1.0) * (1.0 - t.powf((alpha + 1.0) / alpha)));
                let got = phi_tail(2, alpha, t).unwrap();
                assert!(
                    (got - exact).abs() < 1e-10,
                    "α={alpha}, T={t}: {got} vs {exact}"
                );
            }
        }
        for n in [3, 4] {
            let c = crate::weight::normalization_c(n, 1.0).unwrap();
            assert!((phi_tail(n, 1.0, 0.0).unwrap() - c).abs() < 1e-10);
            assert_eq!(phi_tail(n, 1.0, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn phi_exponent() {
        for n in [2, 3, 4] {
            let fit = phi_fit(n, 1.0, PHI_FIT_RANGE.0, PHI_FIT_RANGE.1, 16).unwrap();
            let want = n as f64 / 2.0 + 1.0;
            assert!(
                (fit.fit.slope - want).abs() < 0.05,
                "n={n}: {}",
                fit.fit.slope
            );
        }
    }

    #[test]
    fn stability_report_constant_is_degenerate() {
        let one = TestFunction::constant(3, 2.0, 1.0).unwrap();
        let vol = crate::isoperimetry::sphere_volume::<f64>(3);
        let r = stability_report(&one, 0.3 * vol).unwrap();
        assert!(r.delta_s0.abs() < 1e-11);
        assert_eq!(r.gap_integral, 0.0);
        assert!(r.distance_sq.unwrap().abs() < 1e-9);
        assert!(r.violations().is_empty(), "{r:?}");
    }

    #[test]
    fn stability_chain() {
        let vol = crate::isoperimetry::sphere_volume::<f64>(3);
        for terms in default_terms().into_iter().skip(1) {
            let f = tf(3, terms);
            for &frac in &[0.1, 0.5, 0.9] {
                let r = stability_report(&f, frac * vol).unwrap();
                assert!(r.violations().is_empty(), "{r:?}");
                assert!(r.s_star > 0.0 && r.t_star < 1.0);
            }
        }
    }

    #[test]
    fn psi_non_positive() {
        let f = tf(3, vec![(1, 0.12)]);
        let big_t = f
            .normalized()
            .unwrap()
            .density()
            .unwrap()
            .max_value()
            .unwrap();
        let levels: Vec<f64> = (1..=5).map(|i| big_t * i as f64 / 6.0).collect();
        for p in psi(&f, &levels).unwrap() {
            assert!(p <= 1e-6, "{p}");
        }
    }

    #[test]
    fn layer_cake_moments() {
        let u = tf(4, vec![(2, 0.1)]).density().unwrap();
        for q in [1.0, 2.0] {
            let (a, b) = layer_cake(&u, q).unwrap();
            assert!((a - b).abs() < 1e-6 * a, "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn convex_gap() {
        let f = tf(3, vec![(1, 0.12)]);
        let sq = ConvexSpec::power(2.0).unwrap();
        let (lhs, rhs) = convex_stability_gap(&f, &sq).unwrap();
        assert!(lhs > 0.0 && lhs <= rhs + 1e-6, "{lhs} {rhs}");
        let one = TestFunction::constant(3, 2.0, 1.0).unwrap();
        let (lhs, rhs) = convex_stability_gap(&one, &sq).unwrap();
        assert!(lhs.abs() < 1e-9 && rhs.abs() < 1e-8, "{lhs} {rhs}");
    }
}
