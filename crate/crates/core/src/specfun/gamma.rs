//! Gamma function via the Lanczos approximation (g = 7, nine terms).

use crate::error::{Error, Result};
use crate::scalar::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Largest integer argument for which Γ is computed as an exact factorial product.
const EXACT_FACTORIAL_MAX: usize = 30;

/// Γ(x) for x > 0.
pub fn gamma_fn<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma_fn requires x > 0, got {x}")));
    }
    Ok(gamma_signed(x))
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    if x < T::lit(0.5) {
        // Γ(x) = Γ(x+1)/x keeps the Lanczos sum in its accurate range.
        return Ok(lanczos_ln(x + T::one()) - x.ln());
    }
    Ok(lanczos_ln(x))
}

/// Γ(x) on the whole real line away from the poles, using reflection for x < 1/2.
/// Returns infinity at non-positive integers.
pub(crate) fn gamma_signed<T: Real>(x: T) -> T {
    if let Some(k) = small_positive_integer(x) {
        return factorial::<T>(k - 1);
    }
    if x < T::lit(0.5) {
        if x == x.floor() {
            return T::infinity();
        }
        let s = sin_pi(x);
        return T::PI() / (s * gamma_signed(T::one() - x));
    }
    lanczos(x)
}

/// 1/Γ(x), zero at the poles.
pub(crate) fn recip_gamma<T: Real>(x: T) -> T {
    if x <= T::zero() && x == x.floor() {
        return T::zero();
    }
    T::one() / gamma_signed(x)
}

fn small_positive_integer<T: Real>(x: T) -> Option<usize> {
    if x >= T::one() && x == x.floor() && x <= T::of(EXACT_FACTORIAL_MAX) {
        x.to_usize()
    } else {
        None
    }
}

fn factorial<T: Real>(k: usize) -> T {
    (1..=k).fold(T::one(), |acc, j| acc * T::of(j))
}

fn lanczos_sum<T: Real>(xm1: T) -> T {
    LANCZOS_COEF
        .iter()
        .enumerate()
        .skip(1)
        .fold(T::lit(LANCZOS_COEF[0]), |acc, (i, &c)| {
            acc + T::lit(c) / (xm1 + T::of(i))
        })
}

fn lanczos<T: Real>(x: T) -> T {
    let xm1 = x - T::one();
    let t = xm1 + T::lit(LANCZOS_G + 0.5);
    let sqrt_two_pi = (T::lit(2.0) * T::PI()).sqrt();
    // t^(x-1/2) split in two halves so that moderate arguments do not overflow early.
    let half = t.powf((xm1 + T::lit(0.5)) / T::lit(2.0));
    sqrt_two_pi * half * (half * (-t).exp()) * lanczos_sum(xm1)
}

fn lanczos_ln<T: Real>(x: T) -> T {
    let xm1 = x - T::one();
    let t = xm1 + T::lit(LANCZOS_G + 0.5);
    let ln_sqrt_two_pi = (T::lit(2.0) * T::PI()).sqrt().ln();
    ln_sqrt_two_pi + (xm1 + T::lit(0.5)) * t.ln() - t + lanczos_sum(xm1).ln()
}

/// sin(πx) with exact zeros at the integers.
fn sin_pi<T: Real>(x: T) -> T {
    let r = x - (x / T::lit(2.0)).floor() * T::lit(2.0);
    if r == T::zero() || r == T::one() {
        return T::zero();
    }
    (T::PI() * r).sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factorials_are_exact() {
        assert_eq!(gamma_fn(1.0_f64).unwrap(), 1.0);
        assert_eq!(gamma_fn(5.0_f64).unwrap(), 24.0);
        assert_eq!(gamma_fn(11.0_f64).unwrap(), 3_628_800.0);
    }

    #[test]
    fn half_integer_values() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert_relative_eq!(gamma_fn(0.5).unwrap(), sqrt_pi, max_relative = 1e-14);
        assert_relative_eq!(gamma_fn(2.5).unwrap(), 0.75 * sqrt_pi, max_relative = 1e-14);
        assert_relative_eq!(
            gamma_fn(3.5).unwrap(),
            1.875 * sqrt_pi,
            max_relative = 1e-14
        );
    }

    #[test]
    fn rejects_non_positive() {
        assert!(matches!(gamma_fn(0.0_f64), Err(Error::Domain(_))));
        assert!(matches!(gamma_fn(-1.5_f64), Err(Error::Domain(_))));
        assert!(gamma_fn(f64::NAN).is_err());
    }

    #[test]
    fn reflection_branch() {
        // Γ(-1/2) = -2√π
        let v = gamma_signed(-0.5_f64);
        assert_relative_eq!(v, -2.0 * std::f64::consts::PI.sqrt(), max_relative = 1e-14);
        assert_eq!(recip_gamma(-3.0_f64), 0.0);
        assert_eq!(recip_gamma(0.0_f64), 0.0);
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for &x in &[0.1, 0.7, 3.3, 12.5, 40.0] {
            assert_relative_eq!(
                ln_gamma(x).unwrap(),
                gamma_fn::<f64>(x).unwrap().ln(),
                max_relative = 1e-13,
                epsilon = 1e-14
            );
        }
        // beyond the f64 range of Γ itself
        let stirling = |x: f64| (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(
            ln_gamma(500.0).unwrap(),
            stirling(500.0) + 1.0 / 6000.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn single_precision() {
        assert_relative_eq!(
            gamma_fn(4.5_f32).unwrap(),
            11.631_728_f32,
            max_relative = 1e-5
        );
    }
}
