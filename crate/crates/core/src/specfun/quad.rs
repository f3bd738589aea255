//! Globally adaptive Gauss–Kronrod (10/21-point) quadrature.
//!
//! Semi-infinite intervals [a, ∞) are mapped to [0, 1) by x = a + t/(1−t),
//! dx = dt/(1−t)²; the mapping used is recorded in [`QuadResult::mapping`].

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// weights of the embedded 10-point Gauss rule at XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Variable change applied before integrating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mapping {
    /// Integrated as given.
    Identity,
    /// [a, ∞) mapped by x = a + t/(1−t).
    RationalToUnit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    /// Absolute error estimate, same units as `value`.
    pub error_estimate: T,
    pub evaluations: usize,
    pub mapping: Mapping,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_subdivisions: usize,
}

impl<T: Real> QuadOptions<T> {
    /// Hybrid tolerance `tol·max(1, |value|)`.
    pub fn hybrid(tol: T) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: tol,
            max_subdivisions: 4000,
        }
    }

    /// Pure relative tolerance, for integrals that may be tiny.
    pub fn relative(tol: T) -> Self {
        Self {
            abs_tol: T::min_positive_value(),
            rel_tol: tol,
            max_subdivisions: 4000,
        }
    }
}

/// ∫ₐᵇ f with the hybrid tolerance `abs_tol·max(1, |value|)`; `b` may be +∞.
pub fn adaptive_quad<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    abs_tol: T,
) -> Result<QuadResult<T>> {
    integrate(|x| Ok(f(x)), a, b, &QuadOptions::hybrid(abs_tol))
}

/// General entry point; the integrand may fail.
pub fn integrate<T: Real, F: Fn(T) -> Result<T>>(
    f: F,
    a: T,
    b: T,
    opts: &QuadOptions<T>,
) -> Result<QuadResult<T>> {
    if a.is_nan() || b.is_nan() || a.is_infinite() {
        return Err(Error::Domain(format!("bad integration limits [{a}, {b}]")));
    }
    if b == a {
        return Ok(QuadResult {
            value: T::zero(),
            error_estimate: T::zero(),
            evaluations: 0,
            mapping: Mapping::Identity,
        });
    }
    if b.is_infinite() {
        if b < T::zero() {
            return Err(Error::Domain(
                "lower-unbounded intervals are not supported".into(),
            ));
        }
        let g = |t: T| {
            let one_minus = T::one() - t;
            let x = a + t / one_minus;
            Ok(f(x)? / (one_minus * one_minus))
        };
        let mut res = adapt(g, T::zero(), T::one(), opts)?;
        res.mapping = Mapping::RationalToUnit;
        return Ok(res);
    }
    if b < a {
        let mut res = adapt(&f, b, a, opts)?;
        res.value = -res.value;
        return Ok(res);
    }
    adapt(f, a, b, opts)
}

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    splittable: bool,
    /// error estimate is the rounding floor; bisecting cannot reduce it
    at_floor: bool,
}

fn adapt<T: Real, F: Fn(T) -> Result<T>>(
    f: F,
    a: T,
    b: T,
    opts: &QuadOptions<T>,
) -> Result<QuadResult<T>> {
    let mut evaluations = 0;
    let mut segments = vec![kronrod(&f, a, b, &mut evaluations)?];
    loop {
        let (value, error) = totals(&segments);
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            return Ok(QuadResult {
                value,
                error_estimate: error,
                evaluations,
                mapping: Mapping::Identity,
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.splittable && !s.at_floor)
            .max_by(|x, y| {
                x.1.error
                    .partial_cmp(&y.1.error)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i);
        let Some(i) = worst else {
            if segments.iter().all(|s| s.at_floor || s.error.is_zero()) {
                return Ok(QuadResult {
                    value,
                    error_estimate: error,
                    evaluations,
                    mapping: Mapping::Identity,
                });
            }
            return Err(Error::ToleranceNotMet {
                value: value.to_f64_lossy(),
                estimate: error.to_f64_lossy(),
            });
        };
        if segments.len() >= opts.max_subdivisions {
            return Err(Error::ToleranceNotMet {
                value: value.to_f64_lossy(),
                estimate: error.to_f64_lossy(),
            });
        }
        let seg = segments.swap_remove(i);
        let mid = (seg.a + seg.b) / T::lit(2.0);
        let left = kronrod(&f, seg.a, mid, &mut evaluations)?;
        let right = kronrod(&f, mid, seg.b, &mut evaluations)?;
        segments.push(left);
        segments.push(right);
    }
}

fn totals<T: Real>(segments: &[Segment<T>]) -> (T, T) {
    let mut value = super::hyper::Kahan::new(T::zero());
    let mut error = T::zero();
    for s in segments {
        value.add(s.value);
        error = error + s.error;
    }
    (value.sum(), error)
}

fn kronrod<T: Real, F: Fn(T) -> Result<T>>(
    f: &F,
    a: T,
    b: T,
    evaluations: &mut usize,
) -> Result<Segment<T>> {
    let center = (a + b) / T::lit(2.0);
    let half = (b - a) / T::lit(2.0);
    let fc = f(center)?;
    let mut res_k = fc * T::lit(WGK[10]);
    let mut res_g = T::zero();
    let mut res_abs = res_k.abs();
    let mut fv1 = [T::zero(); 10];
    let mut fv2 = [T::zero(); 10];
    for j in 0..10 {
        let dx = half * T::lit(XGK[j]);
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k = res_k + T::lit(WGK[j]) * (f1 + f2);
        res_abs = res_abs + T::lit(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g = res_g + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    *evaluations += 21;
    let mean = res_k / T::lit(2.0);
    let mut res_asc = T::lit(WGK[10]) * (fc - mean).abs();
    for j in 0..10 {
        res_asc = res_asc + T::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let value = res_k * half;
    res_abs = res_abs * scale;
    res_asc = res_asc * scale;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != T::zero() && error != T::zero() {
        error = res_asc * T::one().min((T::lit(200.0) * error / res_asc).powf(T::lit(1.5)));
    }
    let eps = T::epsilon();
    let mut at_floor = false;
    if res_abs > T::min_positive_value() / (T::lit(50.0) * eps) {
        let floor = T::lit(50.0) * eps * res_abs;
        if floor >= error {
            error = floor;
            at_floor = true;
        }
    }
    if !value.is_finite() {
        return Err(Error::Domain(format!("non-finite integrand on [{a}, {b}]")));
    }
    let splittable =
        (b - a).abs() > T::lit(100.0) * eps * center.abs().max(T::min_positive_value());
    Ok(Segment {
        a,
        b,
        value,
        error,
        splittable,
        at_floor,
    })
}

/// Single 21-point Kronrod application on [a, b] (no adaptivity).
pub(crate) fn kronrod_panel<T: Real, F: Fn(T) -> Result<T>>(f: F, a: T, b: T) -> Result<T> {
    let mut n = 0;
    Ok(kronrod(&f, a, b, &mut n)?.value)
}

/// Nodes and weights of the `count`-point Gauss–Legendre rule on [−1, 1]
/// (Newton iteration on P_count from Chebyshev-like starting points).
pub fn gauss_legendre_rule(count: usize) -> Vec<(f64, f64)> {
    let n = count as f64;
    (1..=count)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=count {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}
