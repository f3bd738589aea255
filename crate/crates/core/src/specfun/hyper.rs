//! Gauss hypergeometric function ₂F₁(a, b; c; z) on the real half-line z ≤ 1.
//!
//! Evaluation routes:
//! - z < 0: Pfaff transformation to w = z/(z−1) ∈ (0, 1), picking the variant
//!   that terminates or has the larger c−a−b.
//! - 0 < z ≤ 3/4, or a terminating series: Kahan-compensated power series.
//! - 3/4 < z < 1 with c−a−b not an integer: the z → 1−z connection formula.
//! - otherwise: direct series with a ratio tail bound and a 10⁶ term cap.
//! - z = 1: Gauss summation when c−a−b > 0.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::gamma::{gamma_signed, recip_gamma};

/// Iteration cap for the direct series.
pub const MAX_TERMS: usize = 1_000_000;

/// Above this argument the connection formula replaces the direct series.
const CONNECTION_THRESHOLD: f64 = 0.75;

/// Parameters (a, b, c) of ₂F₁.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypParams<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> HypParams<T> {
    pub fn new(a: T, b: T, c: T) -> Result<Self> {
        if is_non_positive_integer(c) {
            return Err(Error::Domain(format!("c = {c} is a non-positive integer")));
        }
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::Domain("non-finite hypergeometric parameter".into()));
        }
        Ok(Self { a, b, c })
    }

    /// c − a − b, the exponent governing the behaviour at z = 1.
    pub fn excess(&self) -> T {
        self.c - self.a - self.b
    }

    /// Parameters of the derivative: d/dz F(a,b;c;z) = (ab/c)·F(a+1,b+1;c+1;z).
    pub fn derivative(&self) -> (T, Self) {
        (
            self.a * self.b / self.c,
            Self {
                a: self.a + T::one(),
                b: self.b + T::one(),
                c: self.c + T::one(),
            },
        )
    }

    fn terminating_degree(&self) -> Option<usize> {
        [self.a, self.b]
            .into_iter()
            .filter(|&x| is_non_positive_integer(x))
            .filter_map(|x| (-x).to_usize())
            .min()
    }
}

/// ₂F₁(a, b; c; z) for z < 1, or z = 1 when c − a − b > 0.
pub fn gauss_2f1<T: Real>(params: HypParams<T>, z: T) -> Result<T> {
    if is_non_positive_integer(params.c) {
        return Err(Error::Domain(format!(
            "c = {} is a non-positive integer",
            params.c
        )));
    }
    if z.is_nan() {
        return Err(Error::Domain("NaN argument".into()));
    }
    if z == T::zero() {
        return Ok(T::one());
    }
    if z < T::zero() {
        return pfaff(params, z);
    }
    if z < T::one() {
        return unit_interval(params, z, T::one() - z);
    }
    if z == T::one() {
        return gauss_sum(params);
    }
    Err(Error::Domain(format!("argument z = {z} > 1")))
}

/// ₂F₁ on [0, 1) with 1 − z supplied by the caller, for arguments such as
/// r²/(1+r²) whose complement 1/(1+r²) is known to full precision.
pub fn gauss_2f1_split<T: Real>(params: HypParams<T>, z: T, one_minus_z: T) -> Result<T> {
    if is_non_positive_integer(params.c) {
        return Err(Error::Domain(format!(
            "c = {} is a non-positive integer",
            params.c
        )));
    }
    if !(z >= T::zero() && z < T::one()) {
        return gauss_2f1(params, z);
    }
    if z == T::zero() {
        return Ok(T::one());
    }
    unit_interval(params, z, one_minus_z)
}

/// Derivative of ₂F₁ with respect to z through the contiguous relation.
pub fn gauss_2f1_derivative<T: Real>(params: HypParams<T>, z: T) -> Result<T> {
    let (scale, shifted) = params.derivative();
    if scale == T::zero() {
        return Ok(T::zero());
    }
    Ok(scale * gauss_2f1(shifted, z)?)
}

fn pfaff<T: Real>(p: HypParams<T>, z: T) -> Result<T> {
    let one = T::one();
    let one_minus_z = one - z;
    let w = z / (z - one);
    let one_minus_w = one / one_minus_z;
    // Variant A: (1−z)^{−b} F(c−a, b; c; w); variant B: (1−z)^{−a} F(a, c−b; c; w).
    let keep_b = if is_non_positive_integer(p.b) {
        true
    } else if is_non_positive_integer(p.a) {
        false
    } else if is_non_positive_integer(p.c - p.a) {
        true
    } else if is_non_positive_integer(p.c - p.b) {
        false
    } else {
        // excess of A is a − b, of B is b − a
        p.a >= p.b
    };
    let (prefactor_exp, inner) = if keep_b {
        (
            p.b,
            HypParams {
                a: p.c - p.a,
                b: p.b,
                c: p.c,
            },
        )
    } else {
        (
            p.a,
            HypParams {
                a: p.a,
                b: p.c - p.b,
                c: p.c,
            },
        )
    };
    let value = unit_interval(inner, w, one_minus_w)?;
    Ok(one_minus_z.powf(-prefactor_exp) * value)
}

/// 0 < z < 1, with `one_minus_z` supplied to avoid cancellation near 1.
fn unit_interval<T: Real>(p: HypParams<T>, z: T, one_minus_z: T) -> Result<T> {
    if let Some(deg) = p.terminating_degree() {
        return Ok(polynomial(p, z, deg));
    }
    let excess = p.excess();
    if z > T::lit(CONNECTION_THRESHOLD) && excess != excess.round() {
        return connection(p, one_minus_z);
    }
    series(p, z)
}

fn polynomial<T: Real>(p: HypParams<T>, z: T, degree: usize) -> T {
    let mut acc = Kahan::new(T::one());
    let mut term = T::one();
    for k in 0..degree {
        let kf = T::of(k);
        term = term * (p.a + kf) * (p.b + kf) / ((p.c + kf) * (kf + T::one())) * z;
        acc.add(term);
    }
    acc.sum()
}

/// Direct power series with a geometric tail bound.
pub(crate) fn series<T: Real>(p: HypParams<T>, z: T) -> Result<T> {
    let eps = T::epsilon();
    let mut acc = Kahan::new(T::one());
    let mut term = T::one();
    for k in 0..MAX_TERMS {
        let kf = T::of(k);
        let ratio = (p.a + kf) * (p.b + kf) / ((p.c + kf) * (kf + T::one())) * z;
        term = term * ratio;
        acc.add(term);
        let next_ratio = {
            let k1 = kf + T::one();
            ((p.a + k1) * (p.b + k1) / ((p.c + k1) * (k1 + T::one())) * z).abs()
        };
        if next_ratio < T::one() {
            let tail = term.abs() * next_ratio / (T::one() - next_ratio);
            if tail <= eps * acc.sum().abs() {
                return Ok(acc.sum());
            }
        }
        if term == T::zero() {
            return Ok(acc.sum());
        }
    }
    Err(Error::Convergence {
        iterations: MAX_TERMS,
        last_term: term.to_f64_lossy(),
    })
}

/// F(a,b;c;z) = A·F(a,b;a+b−c+1;1−z) + (1−z)^{c−a−b}·B·F(c−a,c−b;c−a−b+1;1−z)
fn connection<T: Real>(p: HypParams<T>, one_minus_z: T) -> Result<T> {
    let s = p.excess();
    let one = T::one();
    let gc = gamma_signed(p.c);
    let first_coef = gc * gamma_signed(s) * recip_gamma(p.c - p.a) * recip_gamma(p.c - p.b);
    let second_coef = gc * gamma_signed(-s) * recip_gamma(p.a) * recip_gamma(p.b);
    let mut value = T::zero();
    if first_coef != T::zero() {
        let inner = HypParams {
            a: p.a,
            b: p.b,
            c: p.a + p.b - p.c + one,
        };
        value = value + first_coef * series(inner, one_minus_z)?;
    }
    if second_coef != T::zero() {
        let inner = HypParams {
            a: p.c - p.a,
            b: p.c - p.b,
            c: s + one,
        };
        value = value + second_coef * one_minus_z.powf(s) * series(inner, one_minus_z)?;
    }
    Ok(value)
}

fn gauss_sum<T: Real>(p: HypParams<T>) -> Result<T> {
    if let Some(deg) = p.terminating_degree() {
        return Ok(polynomial(p, T::one(), deg));
    }
    let s = p.excess();
    if !(s > T::zero()) {
        return Err(Error::Domain(format!(
            "z = 1 requires c − a − b > 0, got {s}"
        )));
    }
    Ok(gamma_signed(p.c) * gamma_signed(s) * recip_gamma(p.c - p.a) * recip_gamma(p.c - p.b))
}

fn is_non_positive_integer<T: Real>(x: T) -> bool {
    x <= T::zero() && x == x.floor()
}

/// Kahan–Babuška compensated accumulator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kahan<T> {
    sum: T,
    comp: T,
}

impl<T: Real> Kahan<T> {
    pub(crate) fn new(init: T) -> Self {
        Self {
            sum: init,
            comp: T::zero(),
        }
    }

    pub(crate) fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub(crate) fn sum(&self) -> T {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hp(a: f64, b: f64, c: f64) -> HypParams<f64> {
        HypParams::new(a, b, c).unwrap()
    }

    /// Brute-force partial sums, independent of the routing above.
    fn brute_series(a: f64, b: f64, c: f64, z: f64, terms: usize) -> f64 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 0..terms {
            sum += term;
            let kf = k as f64;
            term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        }
        sum
    }

    #[test]
    fn zero_argument() {
        assert_eq!(gauss_2f1(hp(0.3, 1.7, 2.2), 0.0).unwrap(), 1.0);
    }

    #[test]
    fn log_identity_oracle() {
        // brute-force oracle first, then the closed form −ln(1−z)/z
        let oracle = brute_series(1.0, 1.0, 2.0, 0.5, 200);
        assert_relative_eq!(oracle, 2.0 * 2f64.ln(), max_relative = 1e-12);
        let v = gauss_2f1(hp(1.0, 1.0, 2.0), 0.5).unwrap();
        assert_relative_eq!(v, oracle, max_relative = 1e-13);
    }

    #[test]
    fn gauss_endpoint() {
        // frozen from Richardson extrapolation of brute partial sums at z → 1
        let v = gauss_2f1(hp(1.5, -0.5, 2.5), 1.0).unwrap();
        assert_relative_eq!(v, 0.589_048_622_548_086_2, max_relative = 1e-12);
        // equals Γ(1+n/2)Γ(n/2)/Γ(n) at n = 3
        let g = |x: f64| crate::specfun::gamma_fn(x).unwrap();
        assert_relative_eq!(v, g(2.5) * g(1.5) / g(3.0), max_relative = 1e-13);
    }

    #[test]
    fn endpoint_by_extrapolation() {
        // independent route: brute series at z = 1 − ε, then eliminate the O(ε) and
        // O(ε^{3/2}) corrections (c − a − b = 3/2) from three samples.
        let f = |eps: f64| brute_series(1.5, -0.5, 2.5, 1.0 - eps, 3_000_000);
        let eps = [1e-4, 2.5e-5, 6.25e-6];
        let vals = eps.map(f);
        // solve F + A ε + B ε^{3/2} = f(ε) by Cramer's rule
        let rows = eps.map(|e| [1.0, e, e.powf(1.5)]);
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let mut with_rhs = rows;
        for i in 0..3 {
            with_rhs[i][0] = vals[i];
        }
        let extrap = det(with_rhs) / det(rows);
        assert_relative_eq!(extrap, 0.589_048_622_548_086_2, max_relative = 1e-9);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            HypParams::new(1.0, 1.0, -2.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            gauss_2f1(hp(1.0, 1.0, 2.0), 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            gauss_2f1(hp(1.0, 1.0, 2.0), 1.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn pfaff_route_for_negative_arguments() {
        // F(1,1;2;z) = −ln(1−z)/z holds for z < 0 too
        for &z in &[-0.2, -1.0, -9.0, -1e4] {
            let v = gauss_2f1(hp(1.0, 1.0, 2.0), z).unwrap();
            let exact = -(1.0 - z).ln() / z;
            assert_relative_eq!(v, exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn connection_near_one_matches_series() {
        let p = hp(1.5, -0.5, 2.5);
        for &z in &[0.8, 0.9, 0.99] {
            let direct = brute_series(1.5, -0.5, 2.5, z, 200_000);
            assert_relative_eq!(gauss_2f1(p, z).unwrap(), direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn incomplete_beta_closed_form() {
        // B_x(1/2, 1/2)·... : ∫₀^x t^{-1/2}(1−t)^{-1/2} dt = 2 asin √x = 2√x F(1/2,1/2;3/2;x)
        for &x in &[0.1_f64, 0.5, 0.9, 0.999_999] {
            let v = 2.0 * x.sqrt() * gauss_2f1(hp(0.5, 0.5, 1.5), x).unwrap();
            assert_relative_eq!(v, 2.0 * x.sqrt().asin(), max_relative = 1e-13);
        }
    }

    #[test]
    fn derivative_relation() {
        let p = hp(2.5, -0.5, 3.5);
        let z = 0.6;
        let h = 1e-5;
        let fd = (gauss_2f1(p, z + h).unwrap() - gauss_2f1(p, z - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(gauss_2f1_derivative(p, z).unwrap(), fd, max_relative = 1e-8);
    }

    #[test]
    fn terminating_series() {
        // F(−2, b; c; z) = 1 − 2bz/c + b(b+1)z²/(c(c+1))
        let (b, c, z) = (1.5, 2.5, -3.0);
        let exact = 1.0 - 2.0 * b * z / c + b * (b + 1.0) * z * z / (c * (c + 1.0));
        assert_relative_eq!(
            gauss_2f1(hp(-2.0, b, c), z).unwrap(),
            exact,
            max_relative = 1e-14
        );
    }
}
