//! Bracketed inversion of monotone functions (Brent's method) and a
//! golden-section maximizer.

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_ITER: usize = 300;

/// Solve f(r) = target for r in [lo, hi], f strictly monotone.
///
/// Returns r with |f(r) − target| ≤ tol·max(1, |target|), or the best point
/// once the bracket has collapsed to a few ulps.
pub fn invert_monotone<T: Real, F: Fn(T) -> T>(f: F, target: T, lo: T, hi: T, tol: T) -> Result<T> {
    invert_monotone_with(|x| Ok(f(x)), target, lo, hi, tol)
}

/// As [`invert_monotone`] with a fallible function.
pub fn invert_monotone_with<T: Real, F: Fn(T) -> Result<T>>(
    f: F,
    target: T,
    lo: T,
    hi: T,
    tol: T,
) -> Result<T> {
    let ftol = tol * T::one().max(target.abs());
    let g = |x: T| -> Result<T> { Ok(f(x)? - target) };
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (g(a)?, g(b)?);
    if fa.abs() <= ftol && fa.abs() <= fb.abs() {
        return Ok(a);
    }
    if fb.abs() <= ftol {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracket {
            target: target.to_f64_lossy(),
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
            f_lo: (fa + target).to_f64_lossy(),
            f_hi: (fb + target).to_f64_lossy(),
        });
    }
    let two = T::lit(2.0);
    let eps = T::epsilon();
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let xtol = two * eps * b.abs() + T::min_positive_value();
        let m = (c - b) / two;
        if fb.abs() <= ftol || m.abs() <= xtol || fb == T::zero() {
            return Ok(b);
        }
        if e.abs() >= xtol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            if two * p < (T::lit(3.0) * m * q - (xtol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b = if d.abs() > xtol {
            b + d
        } else if m > T::zero() {
            b + xtol
        } else {
            b - xtol
        };
        fb = g(b)?;
    }
    Err(Error::Convergence {
        iterations: MAX_ITER,
        last_term: fb.to_f64_lossy(),
    })
}

/// Golden-section search for the maximum of a unimodal `f` on [lo, hi].
/// Returns (argmax, max).
pub fn maximize_golden<T: Real, F: Fn(T) -> Result<T>>(
    f: F,
    lo: T,
    hi: T,
    xtol: T,
) -> Result<(T, T)> {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..MAX_ITER {
        if (b - a).abs() <= xtol * T::one().max(a.abs() + b.abs()) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        }
    }
    let candidates = [(lo, f(lo)?), (x1, f1), (x2, f2), (hi, f(hi)?)];
    Ok(candidates.into_iter().fold(
        (lo, T::neg_infinity()),
        |best, c| if c.1 > best.1 { c } else { best },
    ))
}
