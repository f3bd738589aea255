// `!(x > 0.0)` is used on purpose throughout so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod fit;
pub mod functionals;
pub mod geometry;
pub mod isoperimetry;
#[cfg(test)]
mod oracle;
pub mod scalar;
pub mod specfun;
pub mod testfam;
pub mod verify;
pub mod weight;

pub use error::{Error, Result};
pub use scalar::Real;

/// A point of Ṙⁿ = Rⁿ ∪ {∞}.
pub type Point = geometry::ExtendedPoint<f64>;
/// A point of the unit sphere Sⁿ ⊂ Rⁿ⁺¹.
pub type SpherePoint = geometry::SpherePoint<f64>;
/// Symmetric orthogonal matrix acting on Rⁿ⁺¹.
pub type Isometry = geometry::IsometryMatrix<f64>;
/// Cap volume, perimeter and isoperimetric profile on Sⁿ.
pub type Caps = isoperimetry::CapGeometry<f64>;
