//! Verification suites driven by a [`RunConfig`]. Each check reports its
//! worst margin: the smallest (bound − value) over everything it looked
//! at, so a check passes iff the margin is non-negative.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{monotonicity_sweep, random_direction, MeanEstimate};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::functionals::{
    bathtub_pair, convex_stability_gap, extremizer_identity, faber_krahn_deficit,
    min_extremizer_distance, norm_monotonicity_gap, phi_fit, point_eval_gap, psi, stability_report,
    wehrl_by_rearrangement, wehrl_extremal, wehrl_value, Cap, ConvexSpec, PHI_FIT_RANGE,
};
use crate::geometry::{
    jacobian_residual, phi_x0, sphere_isometry, stereo_drop, ExtendedPoint, SpherePoint,
};
use crate::isoperimetry::sphere_volume;
use crate::testfam::{Density, TestFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Monotonicity,
    FaberKrahn,
    Wehrl,
    Stability,
    Geometry,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Monotonicity => "monotonicity",
            Suite::FaberKrahn => "faber-krahn",
            Suite::Wehrl => "wehrl",
            Suite::Stability => "stability",
            Suite::Geometry => "geometry",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub worst_margin: f64,
    /// Number of individual comparisons.
    pub count: usize,
    pub runtime_s: f64,
}

fn check(
    suite: &'static str,
    name: impl Into<String>,
    run: impl FnOnce() -> Result<Vec<f64>>,
) -> Result<Check> {
    let start = Instant::now();
    let margins = run()?;
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Check {
        suite,
        name: name.into(),
        passed: !margins.is_empty() && worst >= 0.0 && !worst.is_nan(),
        worst_margin: worst,
        count: margins.len(),
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

fn test_functions(cfg: &RunConfig) -> Result<Vec<TestFunction>> {
    cfg.test_functions
        .iter()
        .map(|t| TestFunction::new(cfg.n, cfg.p, cfg.alpha, t.clone()))
        .collect()
}

fn caps(cfg: &RunConfig) -> Result<Vec<Cap>> {
    cfg.caps
        .iter()
        .map(|&(r, frac)| Cap::on_axis(cfg.n, r, frac))
        .collect()
}

/// Distinct cap measures, as fractions of vol(Sⁿ).
fn cap_fractions(cfg: &RunConfig) -> Vec<f64> {
    let mut f: Vec<f64> = cfg.caps.iter().map(|c| c.1).collect();
    f.sort_by(f64::total_cmp);
    f.dedup();
    f
}

/// The four convex functionals of the Wehrl checks.
pub fn wehrl_family() -> Vec<ConvexSpec> {
    vec![
        ConvexSpec::Power { s: 1.5 },
        ConvexSpec::Power { s: 2.0 },
        ConvexSpec::Power { s: 3.0 },
        ConvexSpec::Entropy,
    ]
}

/// Piecewise-linear G used by the convex stability checks.
pub fn piecewise_example() -> ConvexSpec {
    ConvexSpec::PiecewiseLinear {
        base: 0.0,
        knots: vec![0.3, 0.7, 0.95],
        slopes: vec![0.0, 0.5, 2.0, 4.0],
    }
}

/// |x0| grid for the point-evaluation check; the last entry is ∞.
pub const POINT_GRID: [f64; 8] = [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, f64::INFINITY];

/// Coefficients c of the shrinking family f_c = F_1.
pub const SHRINKING_FAMILY: [f64; 5] = [0.1, 0.05, 0.025, 0.0125, 0.00625];

fn need_test_functions(cfg: &RunConfig, suite: Suite) -> Result<()> {
    if cfg.n < 3 {
        return Err(Error::Parameter(format!(
            "suite {} needs n ≥ 3",
            suite.name()
        )));
    }
    Ok(())
}

pub fn monotonicity(cfg: &RunConfig) -> Result<Vec<Check>> {
    need_test_functions(cfg, Suite::Monotonicity)?;
    let tol = cfg.tolerances.monotonicity;
    let fs = test_functions(cfg)?;
    let mut out = vec![check(
        "monotonicity",
        "residual ≤ tol + differencing bound",
        || {
            let mut margins = Vec::new();
            for f in &fs {
                for r in monotonicity_sweep(f, cfg.levels)? {
                    margins.push(tol + (r.tolerance - 1e-6) - r.residual);
                }
            }
            Ok(margins)
        },
    )?];
    out.push(check("monotonicity", "equality case f ≡ 1", || {
        let one = TestFunction::constant(cfg.n, cfg.p, cfg.alpha)?;
        Ok(monotonicity_sweep(&one, cfg.levels)?
            .iter()
            .map(|r| tol - r.residual.abs())
            .collect())
    })?);
    Ok(out)
}

pub fn faber_krahn(cfg: &RunConfig) -> Result<Vec<Check>> {
    need_test_functions(cfg, Suite::FaberKrahn)?;
    let fs = test_functions(cfg)?;
    let caps = caps(cfg)?;
    let tol = cfg.tolerances.deficit;
    let mut out = vec![check("faber-krahn", "deficit ≥ −tol", || {
        let work: Vec<(&TestFunction, &Cap)> = fs
            .iter()
            .flat_map(|f| caps.iter().map(move |c| (f, c)))
            .collect();
        work.par_iter()
            .map(|(f, c)| Ok(faber_krahn_deficit(f, c)? + tol))
            .collect()
    })?];
    out.push(check(
        "faber-krahn",
        "extremizer identity (Monte Carlo)",
        || {
            caps.iter()
                .enumerate()
                .map(|(i, c)| {
                    let id = extremizer_identity(
                        cfg.n,
                        cfg.alpha,
                        c,
                        cfg.samples,
                        cfg.seed.wrapping_add(i as u64),
                    )?;
                    Ok(cfg.tolerances.mc_sigmas - id.z_score())
                })
                .collect()
        },
    )?);
    out.push(check(
        "faber-krahn",
        "bathtub: cap mass ≤ super-level mass",
        || {
            let work: Vec<(&TestFunction, &Cap)> = fs
                .iter()
                .flat_map(|f| caps.iter().map(move |c| (f, c)))
                .collect();
            work.par_iter()
                .map(|(f, c)| {
                    let (cap, top) = bathtub_pair(f, c)?;
                    Ok(top - cap + tol * top)
                })
                .collect()
        },
    )?);
    Ok(out)
}

pub fn wehrl(cfg: &RunConfig) -> Result<Vec<Check>> {
    Ok(vec![
        wehrl_bound(cfg)?,
        layer_cake_check(cfg)?,
        norm_monotonicity(cfg)?,
        point_evaluation(cfg)?,
    ])
}

/// wehrl(f) ≤ wehrl(1) for the [`wehrl_family`].
pub fn wehrl_bound(cfg: &RunConfig) -> Result<Check> {
    need_test_functions(cfg, Suite::Wehrl)?;
    let fs = test_functions(cfg)?;
    let tol = cfg.tolerances.wehrl;
    check("wehrl", "wehrl(f) ≤ wehrl(1) + tol", || {
        let mut margins = Vec::new();
        for g in &wehrl_family() {
            let top = wehrl_extremal(cfg.n, cfg.alpha, g)?;
            let vals = fs
                .par_iter()
                .map(|f| wehrl_value(f, g))
                .collect::<Result<Vec<_>>>()?;
            margins.extend(vals.iter().map(|v| top + tol - v));
        }
        Ok(margins)
    })
}

fn layer_cake_check(cfg: &RunConfig) -> Result<Check> {
    need_test_functions(cfg, Suite::Wehrl)?;
    let fs = test_functions(cfg)?;
    check("wehrl", "layer-cake agreement for t²", || {
        let g = ConvexSpec::Power { s: 2.0 };
        fs.par_iter()
            .map(|f| Ok(1e-6 - (wehrl_value(f, &g)? - wehrl_by_rearrangement(f, &g)?).abs()))
            .collect()
    })
}

/// ‖f‖_{β,q} ≤ ‖f‖_{α,p} for (p, α, q, β) ∈ {(2,1,4,2), (1,1,3,3)}.
pub fn norm_monotonicity(cfg: &RunConfig) -> Result<Check> {
    need_test_functions(cfg, Suite::Wehrl)?;
    check(
        "wehrl",
        "norm monotonicity ‖f‖_{β,q} ≤ ‖f‖_{α,p}",
        || {
            let mut margins = Vec::new();
            for &(p, a, q, b) in &[(2.0, 1.0, 4.0, 2.0), (1.0, 1.0, 3.0, 3.0)] {
                for terms in &cfg.test_functions {
                    let f = TestFunction::new(cfg.n, p, a, terms.clone())?;
                    margins.push(norm_monotonicity_gap(&f, b, q)? + cfg.tolerances.wehrl);
                }
            }
            Ok(margins)
        },
    )
}

/// Point evaluation gap on [`POINT_GRID`].
pub fn point_evaluation(cfg: &RunConfig) -> Result<Check> {
    need_test_functions(cfg, Suite::Wehrl)?;
    let fs = test_functions(cfg)?;
    check("wehrl", "point evaluation ≤ ‖f‖ᵖ", || {
        let tol = cfg.tolerances.point_eval;
        let mut margins = Vec::new();
        for f in &fs {
            for &r in &POINT_GRID {
                let x0 = if r.is_infinite() {
                    ExtendedPoint::infinity(cfg.n)
                } else {
                    ExtendedPoint::on_axis(cfg.n, r)
                };
                margins.push(point_eval_gap(f, &x0)? + tol);
            }
        }
        Ok(margins)
    })
}

pub fn stability(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut out = vec![
        stability_chain(cfg)?,
        exponent_check(cfg)?,
        convex_gap(cfg)?,
        psi_check(cfg)?,
    ];
    if cfg.p == 2.0 {
        out.push(shrinking_check(cfg)?);
    }
    Ok(out)
}

/// Gap integral, φ(T) and distance bounds of [`stability_report`] for every
/// test function and cap measure.
pub fn stability_chain(cfg: &RunConfig) -> Result<Check> {
    need_test_functions(cfg, Suite::Stability)?;
    let fs = test_functions(cfg)?;
    let tol = cfg.tolerances.stability;
    let vol = sphere_volume::<f64>(cfg.n);
    let fractions = cap_fractions(cfg);
    check(
        "stability",
        "gap integral ≤ δ_{s0}F(s0), φ(T) ≤ gap, distance ≤ 2(1−√T)",
        || {
            let work: Vec<(&TestFunction, f64)> = fs
                .iter()
                .flat_map(|f| fractions.iter().map(move |&s| (f, s * vol)))
                .collect();
            let reports = work
                .par_iter()
                .map(|(f, s0)| stability_report(f, *s0))
                .collect::<Result<Vec<_>>>()?;
            let mut margins = Vec::new();
            for r in &reports {
                margins.push(r.deficit_bound + tol - r.gap_integral);
                margins.push(r.c_alpha * r.gap_integral + tol - r.phi_t);
                margins.push(r.cap_deficit + tol - r.delta_s0);
                if let Some(d) = r.distance_sq {
                    margins.push(r.distance_bound + tol - d);
                }
            }
            Ok(margins)
        },
    )
}

fn exponent_check(cfg: &RunConfig) -> Result<Check> {
    check("stability", "φ(T) exponent n/2 + 1", || {
        let fit = phi_fit(cfg.n, cfg.alpha, PHI_FIT_RANGE.0, PHI_FIT_RANGE.1, 16)?;
        Ok(vec![
            cfg.tolerances.slope - (fit.fit.slope - (cfg.n as f64 / 2.0 + 1.0)).abs(),
        ])
    })
}

/// Convex stability for G = t² and [`piecewise_example`].
pub fn convex_gap(cfg: &RunConfig) -> Result<Check> {
    need_test_functions(cfg, Suite::Stability)?;
    let fs = test_functions(cfg)?;
    let tol = cfg.tolerances.stability;
    check("stability", "convex gap lhs ≤ rhs", || {
        let gs = [ConvexSpec::Power { s: 2.0 }, piecewise_example()];
        let work: Vec<(&TestFunction, &ConvexSpec)> = fs
            .iter()
            .flat_map(|f| gs.iter().map(move |g| (f, g)))
            .collect();
        work.par_iter()
            .map(|(f, g)| {
                let (lhs, rhs) = convex_stability_gap(f, g)?;
                Ok(rhs + tol - lhs)
            })
            .collect()
    })
}

fn psi_check(cfg: &RunConfig) -> Result<Check> {
    need_test_functions(cfg, Suite::Stability)?;
    let fs = test_functions(cfg)?;
    check("stability", "Ψ ≤ 0", || {
        let mut margins = Vec::new();
        for f in fs.iter().filter(|f| !f.is_constant()) {
            let big_t = f.normalized()?.density()?.max_value()?;
            let levels: Vec<f64> = (1..=cfg.levels)
                .map(|i| big_t * i as f64 / (cfg.levels + 1) as f64)
                .collect();
            margins.extend(
                psi(f, &levels)?
                    .iter()
                    .map(|p| cfg.tolerances.stability - p),
            );
        }
        Ok(margins)
    })
}

/// [`family_margins`] of the shrinking family at s0 = vol/2 (needs p = 2).
pub fn shrinking_check(cfg: &RunConfig) -> Result<Check> {
    need_test_functions(cfg, Suite::Stability)?;
    if cfg.p != 2.0 {
        return Err(Error::Parameter(
            "the shrinking family is defined for p = 2".into(),
        ));
    }
    check(
        "stability",
        "shrinking family: distance/δ^{2/(n+2)} bounded",
        || {
            let family = shrinking_family(cfg.n, cfg.alpha, 0.5 * sphere_volume::<f64>(cfg.n))?;
            Ok(family_margins(&family, cfg.tolerances.stability))
        },
    )
}

/// One member of the shrinking family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyPoint {
    pub c: f64,
    pub delta: f64,
    pub distance: f64,
    pub ratio: f64,
}

/// δ_{s0}, min over the |x0| grid of ‖|f_c| − I_{x0}‖ and their ratio
/// distance/δ^{2/(n+2)} for f_c = F_1 with c in [`SHRINKING_FAMILY`] (p = 2).
pub fn shrinking_family(n: usize, alpha: f64, s0: f64) -> Result<Vec<FamilyPoint>> {
    SHRINKING_FAMILY
        .par_iter()
        .map(|&c| {
            let f = TestFunction::new(n, 2.0, alpha, vec![(1, c)])?;
            let delta = stability_report(&f, s0)?.delta_s0;
            let distance = min_extremizer_distance(&f)?;
            Ok(FamilyPoint {
                c,
                delta,
                distance,
                ratio: distance / delta.powf(2.0 / (n as f64 + 2.0)),
            })
        })
        .collect()
}

/// Margins for "δ and the distance decrease to 0 and the ratio does not
/// grow" along the family (c decreasing).
pub fn family_margins(family: &[FamilyPoint], tol: f64) -> Vec<f64> {
    let mut margins = Vec::new();
    for w in family.windows(2) {
        margins.push(w[0].delta - w[1].delta);
        margins.push(w[0].distance - w[1].distance + tol);
        margins.push(w[0].ratio * (1.0 + 1e-9) - w[1].ratio);
    }
    for p in family {
        margins.push(if p.ratio.is_finite() && p.delta > 0.0 {
            1.0
        } else {
            -1.0
        });
    }
    margins
}

/// Random finite point with Gaussian coordinates of standard deviation `scale`.
fn random_point(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> ExtendedPoint<f64> {
    let coords: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect();
    ExtendedPoint::finite(coords).expect("finite sample")
}

pub fn geometry(cfg: &RunConfig) -> Result<Vec<Check>> {
    let n = cfg.n;
    let mut out = vec![check(
        "geometry",
        "Jacobian identity (50 random pairs)",
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut margins = Vec::new();
            while margins.len() < 50 {
                let x0 = random_point(&mut rng, n, 1.5);
                let x = random_point(&mut rng, n, 1.5);
                match jacobian_residual(&x0, &x) {
                    Ok(r) => margins.push(cfg.tolerances.jacobian - r.abs()),
                    // x too close to the preimage of ∞; draw again
                    Err(Error::Singularity) => continue,
                    Err(e) => return Err(e),
                }
            }
            Ok(margins)
        },
    )?];
    out.push(check("geometry", "isometry invariants", || {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
        let mut margins = Vec::new();
        for _ in 0..20 {
            let xi = SpherePoint::new(random_direction(&mut rng, n + 1))?;
            let a = sphere_isometry(&xi);
            let image = a.apply_point(&SpherePoint::north(n));
            let hit = image
                .xi()
                .iter()
                .zip(xi.xi())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            margins.push(1e-12 - a.orthogonality_defect());
            margins.push(1e-12 - a.symmetry_defect());
            margins.push(1e-12 - hit);
            let x0 = random_point(&mut rng, n, 1.0);
            let x = random_point(&mut rng, n, 1.0);
            let back = phi_x0(&x0, &phi_x0(&x0, &x));
            let err = back
                .coords()
                .iter()
                .zip(x.coords())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            margins.push(1e-12 * (1.0 + x.norm()) - err);
        }
        Ok(margins)
    })?);
    out.push(check(
        "geometry",
        "measure invariance ∫W^α∘φ dm_S = c(α)",
        || {
            let v = Density::weight_power(n, cfg.alpha)?;
            let c = v.mass()?;
            let vol = sphere_volume::<f64>(n);
            let mut margins = Vec::new();
            for (i, &r) in [0.5, 2.0].iter().enumerate() {
                let x0 = ExtendedPoint::on_axis(n, r);
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(100 + i as u64));
                let samples = cfg.samples;
                let mut vals: Vec<f64> = Vec::with_capacity(samples);
                for _ in 0..samples {
                    let x = stereo_drop(&SpherePoint::new(random_direction(&mut rng, n + 1))?);
                    let y = phi_x0(&x0, &x);
                    vals.push(if y.is_infinite() {
                        0.0
                    } else {
                        vol * v.value(y.norm())?
                    });
                }
                let est = mean_estimate(&vals);
                margins.push(cfg.tolerances.mc_sigmas - (est.mean - c).abs() / est.stderr);
            }
            Ok(margins)
        },
    )?);
    Ok(out)
}

fn mean_estimate(xs: &[f64]) -> MeanEstimate {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    MeanEstimate {
        mean,
        stderr: (var / k).sqrt(),
        samples: xs.len(),
    }
}

/// Runs one suite (or all of them, in a fixed order).
pub fn run(cfg: &RunConfig, suite: Suite) -> Result<Vec<Check>> {
    Ok(match suite {
        Suite::Monotonicity => monotonicity(cfg)?,
        Suite::FaberKrahn => faber_krahn(cfg)?,
        Suite::Wehrl => wehrl(cfg)?,
        Suite::Stability => stability(cfg)?,
        Suite::Geometry => geometry(cfg)?,
        Suite::All => {
            let mut all = geometry(cfg)?;
            all.extend(monotonicity(cfg)?);
            all.extend(faber_krahn(cfg)?);
            all.extend(wehrl(cfg)?);
            all.extend(stability(cfg)?);
            all
        }
    })
}
