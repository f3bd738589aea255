//! Stereographic chart of Sⁿ, the spherical measure density, the reflections
//! ψ_ξ and their conjugates φ_{x0} = S⁻¹ ∘ ψ_{S(x0)} ∘ S.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A point of Rⁿ ∪ {∞}. The point at infinity carries only its dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPoint<T> {
    coords: Vec<T>,
    at_infinity: bool,
}

impl<T: Real> ExtendedPoint<T> {
    pub fn finite(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Parameter("zero-dimensional point".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(
                "finite point with non-finite coordinate".into(),
            ));
        }
        Ok(Self {
            coords,
            at_infinity: false,
        })
    }

    pub fn origin(n: usize) -> Self {
        Self {
            coords: vec![T::zero(); n],
            at_infinity: false,
        }
    }

    pub fn infinity(n: usize) -> Self {
        Self {
            coords: vec![T::zero(); n],
            at_infinity: true,
        }
    }

    /// The point r·e₁.
    pub fn on_axis(n: usize, r: T) -> Self {
        let mut coords = vec![T::zero(); n];
        coords[0] = r;
        Self {
            coords,
            at_infinity: !r.is_finite(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_infinite(&self) -> bool {
        self.at_infinity
    }

    /// Coordinates; meaningless (all zero) at infinity.
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn norm_sq(&self) -> T {
        if self.at_infinity {
            return T::infinity();
        }
        self.coords.iter().fold(T::zero(), |acc, &c| acc + c * c)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn is_origin(&self) -> bool {
        !self.at_infinity && self.coords.iter().all(|c| c.is_zero())
    }
}

/// A unit vector of R^{n+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint<T> {
    xi: Vec<T>,
}

impl<T: Real> SpherePoint<T> {
    /// Rejects vectors whose norm is off by more than 1e-12 (1e-5 in f32).
    pub fn new(xi: Vec<T>) -> Result<Self> {
        let norm = xi.iter().fold(T::zero(), |acc, &c| acc + c * c).sqrt();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        if xi.len() < 2 || (norm - T::one()).abs() > tol {
            return Err(Error::Domain(format!("not a unit vector (norm {norm})")));
        }
        Ok(Self { xi })
    }

    /// Normalizes any non-zero vector onto the sphere.
    pub fn normalized(mut xi: Vec<T>) -> Result<Self> {
        let norm = xi.iter().fold(T::zero(), |acc, &c| acc + c * c).sqrt();
        if norm.is_zero() || !norm.is_finite() {
            return Err(Error::Domain("cannot normalize a zero vector".into()));
        }
        xi.iter_mut().for_each(|c| *c = *c / norm);
        Ok(Self { xi })
    }

    /// e_{n+1}, the image of the origin.
    pub fn north(n: usize) -> Self {
        let mut xi = vec![T::zero(); n + 1];
        xi[n] = T::one();
        Self { xi }
    }

    /// −e_{n+1}, the image of ∞.
    pub fn south(n: usize) -> Self {
        let mut xi = vec![T::zero(); n + 1];
        xi[n] = -T::one();
        Self { xi }
    }

    pub fn xi(&self) -> &[T] {
        &self.xi
    }

    /// Dimension n of the sphere Sⁿ.
    pub fn dim(&self) -> usize {
        self.xi.len() - 1
    }
}

/// Symmetric orthogonal (n+1)×(n+1) matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryMatrix<T> {
    size: usize,
    entries: Vec<T>,
}

impl<T: Real> IsometryMatrix<T> {
    pub fn identity(size: usize) -> Self {
        let mut entries = vec![T::zero(); size * size];
        for i in 0..size {
            entries[i * size + i] = T::one();
        }
        Self { size, entries }
    }

    /// I − 2wwᵀ/wᵀw.
    fn householder(w: &[T]) -> Self {
        let size = w.len();
        let ww = w.iter().fold(T::zero(), |acc, &c| acc + c * c);
        let mut m = Self::identity(size);
        for i in 0..size {
            for j in 0..size {
                m.entries[i * size + j] = m.entries[i * size + j] - T::lit(2.0) * w[i] * w[j] / ww;
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.size + j]
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        (0..self.size)
            .map(|i| (0..self.size).fold(T::zero(), |acc, j| acc + self.get(i, j) * v[j]))
            .collect()
    }

    pub fn apply_point(&self, p: &SpherePoint<T>) -> SpherePoint<T> {
        SpherePoint {
            xi: self.apply(&p.xi),
        }
    }

    /// max |AᵀA − I|, entrywise.
    pub fn orthogonality_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.size {
            for j in 0..self.size {
                let dot =
                    (0..self.size).fold(T::zero(), |acc, k| acc + self.get(k, i) * self.get(k, j));
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// max |A − Aᵀ|, entrywise.
    pub fn symmetry_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.size {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// S: Ṙⁿ → Sⁿ. Infinity goes to −e_{n+1}.
pub fn stereo_lift<T: Real>(x: &ExtendedPoint<T>) -> SpherePoint<T> {
    let n = x.dim();
    if x.is_infinite() {
        return SpherePoint::south(n);
    }
    let two = T::lit(2.0);
    let s = x.norm_sq();
    let denom = T::one() + s;
    let mut xi: Vec<T> = x.coords.iter().map(|&c| two * c / denom).collect();
    xi.push((T::one() - s) / denom);
    SpherePoint { xi }
}

/// S⁻¹. Uses x_k = ξ_k(1−ξ_{n+1})/Σξ_j² on the southern hemisphere to avoid
/// cancellation in 1 + ξ_{n+1}.
pub fn stereo_drop<T: Real>(p: &SpherePoint<T>) -> ExtendedPoint<T> {
    let n = p.dim();
    let last = p.xi[n];
    let head = &p.xi[..n];
    if last >= T::zero() {
        let d = T::one() + last;
        return ExtendedPoint {
            coords: head.iter().map(|&c| c / d).collect(),
            at_infinity: false,
        };
    }
    let ss = head.iter().fold(T::zero(), |acc, &c| acc + c * c);
    if ss.is_zero() {
        return ExtendedPoint::infinity(n);
    }
    let f = (T::one() - last) / ss;
    let coords: Vec<T> = head.iter().map(|&c| c * f).collect();
    if coords.iter().any(|c| !c.is_finite()) {
        return ExtendedPoint::infinity(n);
    }
    ExtendedPoint {
        coords,
        at_infinity: false,
    }
}

/// Householder reflection A with A·e_{n+1} = ξ, built from w = e_{n+1} − ξ.
/// Identity when ξ = e_{n+1}.
pub fn sphere_isometry<T: Real>(xi: &SpherePoint<T>) -> IsometryMatrix<T> {
    let n = xi.dim();
    let head = &xi.xi[..n];
    let last = xi.xi[n];
    let ss = head.iter().fold(T::zero(), |acc, &c| acc + c * c);
    // 1 − ξ_{n+1} without cancellation near the north pole
    let gap = if last > T::zero() {
        ss / (T::one() + last)
    } else {
        T::one() - last
    };
    if ss.is_zero() && gap.is_zero() {
        return IsometryMatrix::identity(n + 1);
    }
    let mut w: Vec<T> = head.iter().map(|&c| -c).collect();
    w.push(gap);
    IsometryMatrix::householder(&w)
}

/// φ_{x0}(x). Involutive, φ_{x0}(0) = x0, φ_0 = Id.
pub fn phi_x0<T: Real>(x0: &ExtendedPoint<T>, x: &ExtendedPoint<T>) -> ExtendedPoint<T> {
    if x0.is_origin() {
        return x.clone();
    }
    let n = x0.dim();
    // w ∝ e_{n+1} − S(x0) = 2(−x0, |x0|²)/(1+|x0|²); rescaled by 1/|x0|
    let w: Vec<T> = if x0.is_infinite() {
        let mut w = vec![T::zero(); n + 1];
        w[n] = T::one();
        w
    } else {
        let r = x0.norm();
        let mut w: Vec<T> = x0.coords.iter().map(|&c| -c / r).collect();
        w.push(r);
        w
    };
    let ww = w.iter().fold(T::zero(), |acc, &c| acc + c * c);
    let eta = stereo_lift(x);
    let dot = w
        .iter()
        .zip(&eta.xi)
        .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
    let k = T::lit(2.0) * dot / ww;
    let xi: Vec<T> = eta.xi.iter().zip(&w).map(|(&e, &wi)| e - k * wi).collect();
    stereo_drop(&SpherePoint { xi })
}

/// Density of m_S: (2/(1+|x|²))ⁿ.
pub fn measure_density<T: Real>(n: usize, x: &ExtendedPoint<T>) -> Result<T> {
    if x.is_infinite() {
        return Err(Error::Domain(
            "measure density is undefined at infinity".into(),
        ));
    }
    if x.dim() != n {
        return Err(Error::Parameter(format!(
            "point has dimension {}, expected {n}",
            x.dim()
        )));
    }
    Ok(radial_density(n, x.norm()))
}

/// (2/(1+r²))ⁿ.
pub fn radial_density<T: Real>(n: usize, r: T) -> T {
    (T::lit(2.0) / (T::one() + r * r)).powi(n as i32)
}

/// Great-circle distance, computed as 2·asin(|ξ−η|/2) (same as arccos⟨ξ,η⟩,
/// accurate for nearby points).
pub fn sphere_distance<T: Real>(a: &SpherePoint<T>, b: &SpherePoint<T>) -> T {
    let d =
        a.xi.iter()
            .zip(&b.xi)
            .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
            .sqrt();
    T::lit(2.0) * (d / T::lit(2.0)).min(T::one()).asin()
}

/// Geodesic radius on Sⁿ of the Euclidean ball |x| < r: arccos((1−r²)/(1+r²)) = 2·atan r.
pub fn geodesic_radius<T: Real>(r: T) -> T {
    T::lit(2.0) * r.atan()
}

/// Relative defect (|det Dφ_{x0}(x)| − rhs)/rhs of the Jacobian identity
/// |det φ'| = (1+|φ(x)|²)ⁿ/(1+|x|²)ⁿ; Dφ by central differences with
/// step 1e-5·(1+|x|). Exactly zero for x0 = 0.
pub fn jacobian_residual<T: Real>(x0: &ExtendedPoint<T>, x: &ExtendedPoint<T>) -> Result<T> {
    if x.is_infinite() {
        return Err(Error::Domain(
            "jacobian is evaluated at finite points only".into(),
        ));
    }
    if x0.is_origin() {
        return Ok(T::zero());
    }
    let y = phi_x0(x0, x);
    if y.is_infinite() {
        return Err(Error::Singularity);
    }
    let n = x.dim();
    let h = T::lit(1e-5) * (T::one() + x.norm());
    let mut jac = vec![T::zero(); n * n];
    for j in 0..n {
        let mut plus = x.coords.clone();
        let mut minus = x.coords.clone();
        plus[j] = plus[j] + h;
        minus[j] = minus[j] - h;
        let fp = phi_x0(
            x0,
            &ExtendedPoint {
                coords: plus,
                at_infinity: false,
            },
        );
        let fm = phi_x0(
            x0,
            &ExtendedPoint {
                coords: minus,
                at_infinity: false,
            },
        );
        if fp.is_infinite() || fm.is_infinite() {
            return Err(Error::Singularity);
        }
        for i in 0..n {
            jac[i * n + j] = (fp.coords[i] - fm.coords[i]) / (T::lit(2.0) * h);
        }
    }
    let det = determinant(&mut jac, n).abs();
    let rhs = ((T::one() + y.norm_sq()) / (T::one() + x.norm_sq())).powi(n as i32);
    Ok((det - rhs) / rhs)
}

/// Determinant by LU with partial pivoting; destroys `m`.
fn determinant<T: Real>(m: &mut [T], n: usize) -> T {
    let mut det = T::one();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| {
                m[a * n + col]
                    .abs()
                    .partial_cmp(&m[b * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if m[pivot * n + col].is_zero() {
            return T::zero();
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det = det * p;
        for row in col + 1..n {
            let f = m[row * n + col] / p;
            for k in col..n {
                m[row * n + k] = m[row * n + k] - f * m[col * n + k];
            }
        }
    }
    det
}

/// Δ_S g at x by second-order central differences of the stereographic
/// formula ((1+|x|²)/2)²Δg + (2−n)((1+|x|²)/2)·x·∇g.
pub fn laplace_beltrami<T: Real, F: Fn(&[T]) -> T>(g: F, x: &[T], h: T) -> T {
    let n = x.len();
    let two = T::lit(2.0);
    let g0 = g(x);
    let mut lap = T::zero();
    let mut radial = T::zero();
    let mut p = x.to_vec();
    for k in 0..n {
        p[k] = x[k] + h;
        let gp = g(&p);
        p[k] = x[k] - h;
        let gm = g(&p);
        p[k] = x[k];
        lap = lap + (gp - two * g0 + gm) / (h * h);
        radial = radial + x[k] * (gp - gm) / (two * h);
    }
    let s = (T::one() + x.iter().fold(T::zero(), |acc, &c| acc + c * c)) / two;
    s * s * lap + (T::of(2) - T::of(n)) * s * radial
}
