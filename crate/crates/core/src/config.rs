//! Run configuration for the batch driver, read from TOML. Every field has a
//! default so an empty file (or no file) is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::testfam::{default_terms, membership_margin_raw};

/// Named tolerances; all must be positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// |ode_residual| of the weight profile.
    pub ode_residual: f64,
    /// Slack added to the monotonicity residual (on top of the differencing bound).
    pub monotonicity: f64,
    /// Faber–Krahn deficit floor (deficit ≥ −tol).
    pub deficit: f64,
    /// Wehrl and norm-monotonicity slack.
    pub wehrl: f64,
    pub point_eval: f64,
    /// Stability chain and convex-gap slack.
    pub stability: f64,
    /// |fitted slope − (n/2 + 1)|.
    pub slope: f64,
    /// Relative Jacobian residual.
    pub jacobian: f64,
    /// Monte Carlo agreement in standard errors.
    pub mc_sigmas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode_residual: 1e-8,
            monotonicity: 1e-6,
            deficit: 1e-8,
            wehrl: 1e-8,
            point_eval: 1e-8,
            stability: 1e-6,
            slope: 0.05,
            jacobian: 1e-5,
            mc_sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub alpha: f64,
    pub p: f64,
    /// Each entry is a list of (m, c) terms; `[]` is f ≡ 1.
    pub test_functions: Vec<Vec<(u32, f64)>>,
    /// (|x0|, measure fraction) pairs; centres lie on the first axis.
    pub caps: Vec<(f64, f64)>,
    /// Number of interior levels for level-set sweeps.
    pub levels: usize,
    pub seed: u64,
    /// Monte Carlo sample count.
    pub samples: usize,
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 3,
            alpha: 1.0,
            p: 2.0,
            test_functions: default_terms(),
            caps: vec![(0.0, 0.1), (0.0, 0.5), (0.5, 0.25), (1.0, 0.05), (2.0, 0.4)],
            levels: 20,
            seed: 20240611,
            samples: 200_000,
            tolerances: Tolerances::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n < 2 {
            return Err(format!("n must be at least 2, got {}", self.n));
        }
        if !(self.alpha > 0.0 && self.p > 0.0) {
            return Err(format!(
                "need α > 0 and p > 0, got α={}, p={}",
                self.alpha, self.p
            ));
        }
        if self.levels < 2 || self.samples < 2 {
            return Err("levels and samples must be at least 2".into());
        }
        let t = &self.tolerances;
        let all = [
            ("ode_residual", t.ode_residual),
            ("monotonicity", t.monotonicity),
            ("deficit", t.deficit),
            ("wehrl", t.wehrl),
            ("point_eval", t.point_eval),
            ("stability", t.stability),
            ("slope", t.slope),
            ("jacobian", t.jacobian),
            ("mc_sigmas", t.mc_sigmas),
        ];
        if let Some((name, v)) = all.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(format!("tolerance {name} must be positive, got {v}"));
        }
        for &(r, frac) in &self.caps {
            if !(frac > 0.0 && frac < 1.0) || !(r >= 0.0 && r.is_finite()) {
                return Err(format!(
                    "cap ({r}, {frac}) needs |x0| ≥ 0 and a fraction in (0, 1)"
                ));
            }
        }
        if self.n >= 3 {
            for terms in &self.test_functions {
                if terms.iter().any(|&(m, c)| m == 0 || !(c >= 0.0)) {
                    return Err(format!("test function {terms:?}: need m ≥ 1 and c ≥ 0"));
                }
                let margin = membership_margin_raw(self.n, self.p, self.alpha, terms);
                if !(margin > 0.0) {
                    return Err(format!(
                        "test function {terms:?} violates the membership margin ({margin})"
                    ));
                }
            }
        } else if self.test_functions.iter().any(|t| !t.is_empty()) {
            return Err("non-constant test functions need n ≥ 3".into());
        }
        Ok(())
    }
}
