//! Caps of Sⁿ in the stereographic chart: volume V(r), perimeter P(r), the
//! inverse R(v) and the isoperimetric profile Θ(v) = v/P(R(v))².
//!
//! Caps are parameterized by the Euclidean radius r of the ball |x| < r, not
//! by geodesic radius (see [`geodesic_radius`](crate::geometry::geodesic_radius)).
//! σ_{n−1} = 2π^{n/2}/Γ(n/2) is the surface area of S^{n−1}.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::specfun::{gamma_fn, gauss_2f1, invert_monotone_with, HypParams};

/// vol(Sⁿ) = 2π^{(n+1)/2}/Γ((n+1)/2).
pub fn sphere_volume<T: Real>(n: usize) -> T {
    let h = T::of(n + 1) / T::lit(2.0);
    T::lit(2.0) * T::PI().powf(h) / gamma_fn(h).expect("positive argument")
}

/// σ_{n−1}, surface area of the unit sphere in Rⁿ.
pub fn sigma<T: Real>(n: usize) -> T {
    let h = T::of(n) / T::lit(2.0);
    T::lit(2.0) * T::PI().powf(h) / gamma_fn(h).expect("positive argument")
}

/// Cap geometry for a fixed dimension, with the constants precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapGeometry<T> {
    n: usize,
    total_volume: T,
    sigma: T,
    /// 2ⁿσ_{n−1}
    scale: T,
}

impl<T: Real> CapGeometry<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!(
                "cap geometry needs n ≥ 2, got {n}"
            )));
        }
        let sigma = sigma::<T>(n);
        Ok(Self {
            n,
            total_volume: sphere_volume(n),
            sigma,
            scale: T::lit(2.0).powi(n as i32) * sigma,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total_volume(&self) -> T {
        self.total_volume
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// 2ⁿσ ∫₀^{r} τ^{n−1}(1+τ²)^{−n} dτ as an incomplete beta function of
    /// x = r²/(1+r²) ≤ 1/2; the outer half uses V(r) = vol − V(1/r).
    pub fn volume(&self, r: T) -> T {
        if r <= T::zero() {
            return T::zero();
        }
        if r.is_infinite() {
            return self.total_volume;
        }
        if r > T::one() {
            return self.total_volume - self.inner_volume(r.recip());
        }
        self.inner_volume(r)
    }

    fn inner_volume(&self, r: T) -> T {
        let x = r * r / (T::one() + r * r);
        self.volume_in_x(x)
    }

    // valid for x ∈ [0, 1/2]
    fn volume_in_x(&self, x: T) -> T {
        let h = T::of(self.n) / T::lit(2.0);
        let params = HypParams {
            a: h,
            b: T::one() - h,
            c: h + T::one(),
        };
        let f = gauss_2f1(params, x).expect("argument in [0, 1/2]");
        self.scale * x.powf(h) / T::of(self.n) * f
    }

    /// dV/dr = 2ⁿσ r^{n−1}/(1+r²)ⁿ.
    pub fn volume_derivative(&self, r: T) -> T {
        if r.is_infinite() {
            return T::zero();
        }
        let q = r / (T::one() + r * r);
        self.scale * q.powi(self.n as i32 - 1) / (T::one() + r * r)
    }

    /// σ 2^{n−1} r^{n−1}/(1+r²)^{n−1}; symmetric under r → 1/r.
    pub fn perimeter(&self, r: T) -> T {
        if r <= T::zero() || r.is_infinite() {
            return T::zero();
        }
        let q = T::lit(2.0) * r / (T::one() + r * r);
        self.sigma * q.powi(self.n as i32 - 1)
    }

    /// R(v): the Euclidean radius with V(R(v)) = v, to 1e-13 relative.
    pub fn radius_for_volume(&self, v: T) -> Result<T> {
        let half = self.total_volume / T::lit(2.0);
        if !(v > T::zero() && v < self.total_volume) {
            return Err(Error::Bracket {
                target: v.to_f64_lossy(),
                lo: 0.0,
                hi: f64::INFINITY,
                f_lo: 0.0,
                f_hi: self.total_volume.to_f64_lossy(),
            });
        }
        if v == half {
            return Ok(T::one());
        }
        if v > half {
            return Ok(self.radius_for_volume(self.total_volume - v)?.recip());
        }
        let tol = T::lit(1e-13).max(T::epsilon() * T::lit(8.0));
        let x = invert_monotone_with(
            |x| Ok(self.volume_in_x(x) / v),
            T::one(),
            T::zero(),
            T::lit(0.5),
            tol,
        )?;
        Ok((x / (T::one() - x)).sqrt())
    }

    /// Θ(v) = v/P(R(v))².
    pub fn theta(&self, v: T) -> Result<T> {
        if !(v > T::zero() && v < self.total_volume) {
            return Err(Error::Domain(format!("Θ is defined on (0, vol), got {v}")));
        }
        let p = self.perimeter(self.radius_for_volume(v)?);
        Ok(v / (p * p))
    }
}

/// Free-function forms taking the dimension explicitly.
pub fn cap_volume<T: Real>(n: usize, r: T) -> Result<T> {
    Ok(CapGeometry::new(n)?.volume(r))
}

pub fn cap_perimeter<T: Real>(n: usize, r: T) -> Result<T> {
    Ok(CapGeometry::new(n)?.perimeter(r))
}

pub fn inverse_volume<T: Real>(n: usize, v: T) -> Result<T> {
    CapGeometry::new(n)?.radius_for_volume(v)
}

pub fn theta<T: Real>(n: usize, v: T) -> Result<T> {
    CapGeometry::new(n)?.theta(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{adaptive_quad, integrate, QuadOptions};
    use std::f64::consts::PI;

    #[test]
    fn constants() {
        assert!((sphere_volume::<f64>(2) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_volume::<f64>(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sigma::<f64>(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sigma::<f64>(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn volume_n2_closed_form() {
        let g = CapGeometry::<f64>::new(2).unwrap();
        assert_eq!(g.volume(0.0), 0.0);
        assert!((g.volume(f64::INFINITY) - 4.0 * PI).abs() < 1e-13);
        for &r in &[1e-3, 0.2, 1.0, 1.7, 40.0] {
            let exact = 4.0 * PI * r * r / (1.0 + r * r);
            assert!((g.volume(r) - exact).abs() <= 1e-13 * exact, "r={r}");
        }
    }

    #[test]
    fn volume_matches_radial_quadrature() {
        for n in 2..=6 {
            let g = CapGeometry::<f64>::new(n).unwrap();
            for &r in &[0.05, 0.5, 1.0, 2.5, 20.0] {
                let integrand = |t: f64| t.powi(n as i32 - 1) / (1.0 + t * t).powi(n as i32);
                let q =
                    integrate(|t| Ok(integrand(t)), 0.0, r, &QuadOptions::relative(1e-13)).unwrap();
                let oracle = 2f64.powi(n as i32) * sigma::<f64>(n) * q.value;
                assert!(
                    (g.volume(r) - oracle).abs() <= 1e-11 * oracle,
                    "n={n} r={r}"
                );
            }
            let whole = adaptive_quad(
                |t: f64| t.powi(n as i32 - 1) / (1.0 + t * t).powi(n as i32),
                0.0,
                f64::INFINITY,
                1e-14,
            )
            .unwrap();
            let total = 2f64.powi(n as i32) * sigma::<f64>(n) * whole.value;
            assert!((total - g.total_volume()).abs() < 1e-11 * total);
        }
    }

    #[test]
    fn perimeter_values() {
        let g = CapGeometry::<f64>::new(2).unwrap();
        assert_eq!(g.perimeter(0.0), 0.0);
        assert!((g.perimeter(1.0) - 2.0 * PI).abs() < 1e-14);
        let g5 = CapGeometry::<f64>::new(5).unwrap();
        for &r in &[0.1, 0.7, 3.0] {
            assert!((g5.perimeter(r) - g5.perimeter(1.0 / r)).abs() < 1e-13 * g5.perimeter(r));
        }
    }

    #[test]
    fn inverse_volume_round_trip() {
        for n in 2..=5 {
            let g = CapGeometry::<f64>::new(n).unwrap();
            let vol = g.total_volume();
            assert_eq!(g.radius_for_volume(vol / 2.0).unwrap(), 1.0);
            for &frac in &[1e-9, 1e-4, 0.1, 0.3, 0.49, 0.51, 0.9, 0.999] {
                let v = frac * vol;
                let r = g.radius_for_volume(v).unwrap();
                assert!((g.volume(r) - v).abs() <= 1e-10 * v, "n={n} frac={frac}");
            }
            assert!(g.radius_for_volume(0.0).is_err());
            assert!(g.radius_for_volume(vol).is_err());
        }
        assert!((inverse_volume(2, 2.0 * PI).unwrap() - 1.0_f64).abs() < 1e-15);
    }

    #[test]
    fn theta_n2_closed_form() {
        let g = CapGeometry::<f64>::new(2).unwrap();
        for k in 1..100 {
            let v = 4.0 * PI * k as f64 / 100.0;
            let exact = 1.0 / (4.0 * PI - v);
            assert!((g.theta(v).unwrap() - exact).abs() <= 1e-10 * exact);
        }
        assert!(g.theta(0.0).is_err());
    }

    #[test]
    fn caps_close_the_isoperimetric_identity() {
        for n in 3..=5 {
            let g = CapGeometry::<f64>::new(n).unwrap();
            for &r in &[0.01, 0.3, 1.0, 4.0] {
                let v = g.volume(r);
                let p = g.perimeter(r);
                assert!((p * p - v / g.theta(v).unwrap()).abs() <= 1e-10 * p * p);
            }
        }
    }

    #[test]
    fn theta_blows_up_near_full_volume() {
        let g = CapGeometry::<f64>::new(3).unwrap();
        let vol = g.total_volume();
        let near = g.theta(vol * (1.0 - 1e-6)).unwrap();
        let mid = g.theta(vol * 0.5).unwrap();
        assert!(near > 1e3 * mid);
    }

    #[test]
    fn small_volume_power_law() {
        for n in 3..=5 {
            let g = CapGeometry::<f64>::new(n).unwrap();
            let vol = g.total_volume();
            let (xs, ys): (Vec<f64>, Vec<f64>) = (0..20)
                .map(|k| {
                    let v = vol * 10f64.powf(-6.0 + 3.0 * k as f64 / 19.0);
                    (v.ln(), g.theta(v).unwrap().ln())
                })
                .unzip();
            let fit = crate::fit::linear_fit(&xs, &ys).unwrap();
            let expected = (2.0 - n as f64) / n as f64;
            assert!((fit.slope - expected).abs() < 0.02, "n={n}: {}", fit.slope);
        }
    }

    #[test]
    fn single_precision_volume() {
        let g = CapGeometry::<f32>::new(2).unwrap();
        assert!((g.volume(1.0) - 2.0 * std::f32::consts::PI).abs() < 1e-5);
    }
}
