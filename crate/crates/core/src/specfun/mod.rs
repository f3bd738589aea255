//! Special-function and numeric kernels: Γ, ₂F₁, adaptive quadrature and
//! monotone inversion. All routines are generic over [`Real`](crate::Real).

mod gamma;
mod hyper;
mod quad;
mod roots;

pub use gamma::{gamma_fn, ln_gamma};
pub use hyper::{gauss_2f1, gauss_2f1_derivative, gauss_2f1_split, HypParams, MAX_TERMS};
pub(crate) use quad::kronrod_panel;
pub use quad::{adaptive_quad, gauss_legendre_rule, integrate, Mapping, QuadOptions, QuadResult};
pub use roots::{invert_monotone, invert_monotone_with, maximize_golden};
