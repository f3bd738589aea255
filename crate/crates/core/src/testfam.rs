//! The test family F_m: radial solutions of Δ_S log F_m = c_m(1+|x|²)^{−m}
//! with F_m(0) = 1, products of them, and the densities u = λᵖ|∏F|ᵖW_nᵅ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isoperimetry::CapGeometry;
use crate::specfun::{integrate, maximize_golden, QuadOptions};
use crate::weight::{
    laplace_log, radial_kernel, sandwich_constant, sandwich_exponent, RadialProfile, Weight,
};

/// f = λ·∏F_{m_k}, with exponents p, α of the space B_{α,p} on Rⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    /// (m_k, c_k) pairs.
    pub terms: Vec<(u32, f64)>,
    /// Constant multiple λ > 0; 1 unless normalized.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

/// α·Γ(n/2)Γ(n/2+1)/Γ(n) − p·Σc_k.
pub fn membership_margin_raw(n: usize, p: f64, alpha: f64, terms: &[(u32, f64)]) -> f64 {
    alpha * sandwich_constant(n) - p * terms.iter().map(|t| t.1).sum::<f64>()
}

impl TestFunction {
    pub fn new(n: usize, p: f64, alpha: f64, terms: Vec<(u32, f64)>) -> Result<Self> {
        if n < 3 {
            return Err(Error::Parameter(format!(
                "test functions need n ≥ 3, got {n}"
            )));
        }
        if !(p > 0.0 && alpha > 0.0) {
            return Err(Error::Parameter(format!(
                "need p > 0 and α > 0, got p={p}, α={alpha}"
            )));
        }
        for &(m, c) in &terms {
            if m == 0 {
                return Err(Error::Parameter("term index m must be ≥ 1".into()));
            }
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::Parameter(format!(
                    "coefficients must be finite and ≥ 0, got {c}"
                )));
            }
        }
        let margin = membership_margin_raw(n, p, alpha, &terms);
        if !(margin > 0.0) {
            return Err(Error::Parameter(format!(
                "p·Σc must stay below α·Γ(n/2)Γ(n/2+1)/Γ(n) (margin {margin})"
            )));
        }
        Ok(Self {
            n,
            p,
            alpha,
            terms,
            scale: 1.0,
        })
    }

    /// f ≡ 1.
    pub fn constant(n: usize, p: f64, alpha: f64) -> Result<Self> {
        Self::new(n, p, alpha, Vec::new())
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.1 == 0.0)
    }

    pub fn membership_margin(&self) -> f64 {
        membership_margin_raw(self.n, self.p, self.alpha, &self.terms)
    }

    /// Same product with exponents (q, β) in place of (p, α).
    pub fn with_exponents(&self, p: f64, alpha: f64) -> Result<Self> {
        Ok(Self::new(self.n, p, alpha, self.terms.clone())?.with_scale(self.scale))
    }

    pub fn density(&self) -> Result<Density> {
        Density::new(self)
    }

    /// Copy rescaled so that ‖f‖_{α,p} = 1.
    pub fn normalized(&self) -> Result<Self> {
        let d = Density::new(&self.clone().with_scale(1.0))?;
        let c_alpha = d.weight.normalization(self.alpha)?;
        let norm_p = d.mass()? / c_alpha;
        Ok(self.clone().with_scale(norm_p.powf(-1.0 / self.p)))
    }

    /// Short label such as `n3 p2 a1 [1:0.05]` for reports.
    pub fn label(&self) -> String {
        let terms: Vec<String> = self.terms.iter().map(|(m, c)| format!("{m}:{c}")).collect();
        format!(
            "n{} p{} a{} [{}]",
            self.n,
            self.p,
            self.alpha,
            terms.join(",")
        )
    }
}

/// The test functions used by the sweeps; all satisfy the membership margin
/// for n ∈ {3, 4} with p = 2, α = 1.
pub fn default_terms() -> Vec<Vec<(u32, f64)>> {
    vec![
        vec![],
        vec![(1, 0.05)],
        vec![(1, 0.12)],
        vec![(2, 0.1)],
        vec![(1, 0.04), (2, 0.06)],
        vec![(3, 0.14)],
    ]
}

/// d/dr log F_m(r) = K_{m,c}(r).
pub fn log_f_derivative(n: usize, m: u32, c: f64, r: f64) -> Result<f64> {
    radial_kernel(n, m, c, r)
}

/// u = |f|ᵖW_nᵅ with the log-profiles of every factor tabulated.
#[derive(Debug, Clone)]
pub struct Density {
    f: TestFunction,
    weight: Weight,
    terms: Vec<RadialProfile>,
    caps: CapGeometry<f64>,
}

impl Density {
    pub fn new(f: &TestFunction) -> Result<Self> {
        let terms = f
            .terms
            .iter()
            .filter(|t| t.1 != 0.0)
            .map(|&(m, c)| RadialProfile::new(f.n, m, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            f: f.clone(),
            weight: Weight::new(f.n)?,
            terms,
            caps: CapGeometry::new(f.n)?,
        })
    }

    /// The weight alone, u = W_nᵅ, in dimension n (n = 2 allowed).
    pub fn weight_power(n: usize, alpha: f64) -> Result<Self> {
        let f = TestFunction {
            n,
            p: 1.0,
            alpha,
            terms: Vec::new(),
            scale: 1.0,
        };
        Ok(Self {
            weight: Weight::new(n)?,
            terms: Vec::new(),
            caps: CapGeometry::new(n)?,
            f,
        })
    }

    pub fn function(&self) -> &TestFunction {
        &self.f
    }

    pub fn n(&self) -> usize {
        self.f.n
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn caps(&self) -> &CapGeometry<f64> {
        &self.caps
    }

    /// log u(r).
    pub fn log_value(&self, r: f64) -> Result<f64> {
        let mut s = self.f.alpha * self.weight.log_value(r)?;
        for t in &self.terms {
            s += self.f.p * t.log_value(r)?;
        }
        Ok(s + self.f.p * self.f.scale.ln())
    }

    /// u(r).
    pub fn value(&self, r: f64) -> Result<f64> {
        if r.is_infinite() {
            return Ok(0.0);
        }
        Ok(self.log_value(r)?.exp())
    }

    /// d/dr log u(r).
    pub fn log_derivative(&self, r: f64) -> Result<f64> {
        let mut s = self.f.alpha * self.weight.profile().derivative(r)?;
        for t in &self.terms {
            s += self.f.p * t.derivative(r)?;
        }
        Ok(s)
    }

    /// |f(r)| = λ·∏F_{m_k}(r).
    pub fn modulus(&self, r: f64) -> Result<f64> {
        let mut s = self.f.scale.ln();
        for t in &self.terms {
            s += t.log_value(r)?;
        }
        Ok(s.exp())
    }

    /// (argmax, max) of u: coarse scan of log u on the profile grid, then
    /// golden-section refinement around the best node.
    pub fn max_point(&self) -> Result<(f64, f64)> {
        let radii = self.weight.profile().radii();
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &r) in radii.iter().enumerate() {
            let v = self.log_value(r)?;
            if v > best.1 {
                best = (i, v);
            }
        }
        let lo = radii[best.0.saturating_sub(1)];
        let hi = radii[(best.0 + 1).min(radii.len() - 1)];
        let (r, log_max) = maximize_golden(|r| self.log_value(r), lo, hi, 1e-12)?;
        let (r, log_max) = if log_max >= best.1 {
            (r, log_max)
        } else {
            (radii[best.0], best.1)
        };
        Ok((r, log_max.exp()))
    }

    /// T = max u.
    pub fn max_value(&self) -> Result<f64> {
        Ok(self.max_point()?.1)
    }

    /// Σ_k Δ_S log F_{m_k} − Σ_k c_k(1+r²)^{−m_k}.
    pub fn laplace_log_residual(&self, r: f64) -> Result<f64> {
        laplace_log_residual(&self.f, r)
    }

    /// ∫ u dm_S.
    pub fn mass(&self) -> Result<f64> {
        self.integrate_against_measure(|_, u| u)
    }

    /// ∫ G(r, u(r)) dm_S over Rⁿ for radial data, as ∫₀^∞ V′(r)·G dr.
    pub fn integrate_against_measure(&self, g: impl Fn(f64, f64) -> f64) -> Result<f64> {
        let f = |r: f64| Ok(self.caps.volume_derivative(r) * g(r, self.value(r)?));
        integrate_radial(f, 0.0, f64::INFINITY)
    }
}

/// ∫ₐᵇ f(r) dr for radial integrands that decay at infinity. The range is
/// cut into pieces doubling in length; beyond r = 1e6 the rational map to
/// [0, 1) is used.
pub fn integrate_radial<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64) -> Result<f64> {
    let opts = QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-12,
        max_subdivisions: 2000,
    };
    let mut total = 0.0;
    let mut lo = a;
    let mut hi = if a < 0.5 { 0.5 } else { a * 2.0 };
    loop {
        let top = hi.min(b);
        let piece = integrate(&f, lo, top, &opts)?.value;
        total += piece;
        if top >= b {
            return Ok(total);
        }
        lo = top;
        if lo >= 8.0
            && piece.abs() <= 1e-17 * total.abs()
            && f(lo)?.abs() * lo <= 1e-17 * total.abs()
        {
            return Ok(total);
        }
        if lo >= 1e6 {
            return Ok(total + integrate(&f, lo, f64::INFINITY, &opts)?.value);
        }
        hi = lo * 2.0;
    }
}

/// log |f|ᵖ W_nᵅ at r, for one-off evaluations.
pub fn u_density(f: &TestFunction, r: f64) -> Result<f64> {
    Density::new(f)?.value(r)
}

/// Radial Δ_S log ∏F_{m_k} minus Σc_k(1+r²)^{−m_k}.
pub fn laplace_log_residual(f: &TestFunction, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Domain(format!("residual needs r > 0, got {r}")));
    }
    let mut s = 0.0;
    for &(m, c) in &f.terms {
        s += laplace_log(f.n, m, c, r)? - c * (1.0 + r * r).powi(-(m as i32));
    }
    Ok(s)
}

/// log F_m(r) ≤ c·4((1+r²)^{(n−2)/2} − 1)/(n(n−2)) for c ≥ 0.
pub fn fm_upper_bound(n: usize, c: f64, r: f64) -> f64 {
    c * sandwich_exponent(n, r)
}
