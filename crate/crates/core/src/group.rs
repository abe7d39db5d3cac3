//! Heisenberg group arithmetic in exponential coordinates.
//!
//! A point of Hⁿ is `(x, y, t)` with `x, y ∈ Rⁿ`, and the product is
//!
//! ```text
//! (x, y, t) ∘ (x', y', t') = (x + x', y + y', t + t' + 2(x'·y − x·y'))
//! ```
//!
//! Horizontal vectors `v = (a, b) ∈ R²ⁿ` act through `exp`, which maps `v` to
//! the point `(a, b, 0)`. Everything here is pure and allocation-free for
//! `n ≤ 4`.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{HeisError, Result};

/// Inline storage for one block of `n` coordinates.
pub type Coords = SmallVec<[f64; 4]>;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

#[inline]
fn sq(a: &[f64]) -> f64 {
    a.iter().map(|u| u * u).sum()
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(HeisError::DimensionMismatch { expected, got })
    }
}

/// A point `ξ = (x, y, t)` of Hⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    pub x: Coords,
    pub y: Coords,
    pub t: f64,
}

/// A horizontal direction `v = (a, b) ∈ V₁ ≅ R²ⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizontalVector {
    pub a: Coords,
    pub b: Coords,
}

impl HPoint {
    pub fn new(x: &[f64], y: &[f64], t: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(HeisError::InvalidParameter("dimension n must be >= 1".into()));
        }
        check_dims(x.len(), y.len())?;
        let p = HPoint {
            x: Coords::from_slice(x),
            y: Coords::from_slice(y),
            t,
        };
        if !p.is_finite() {
            return Err(HeisError::NonFinite(format!("point {:?}", p.to_flat())));
        }
        Ok(p)
    }

    /// Point of the first Heisenberg group H¹.
    pub fn h1(x: f64, y: f64, t: f64) -> Self {
        HPoint {
            x: Coords::from_slice(&[x]),
            y: Coords::from_slice(&[y]),
            t,
        }
    }

    /// The neutral element `e` of Hⁿ.
    pub fn identity(n: usize) -> Self {
        HPoint {
            x: Coords::from_elem(0.0, n),
            y: Coords::from_elem(0.0, n),
            t: 0.0,
        }
    }

    /// Parses `[x_1..x_n, y_1..y_n, t]`.
    pub fn from_flat(c: &[f64]) -> Result<Self> {
        if c.len() < 3 || c.len().is_multiple_of(2) {
            return Err(HeisError::InvalidParameter(format!(
                "a point needs 2n+1 coordinates, got {}",
                c.len()
            )));
        }
        let n = (c.len() - 1) / 2;
        HPoint::new(&c[..n], &c[n..2 * n], c[2 * n])
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.dim() + 1);
        out.extend_from_slice(&self.x);
        out.extend_from_slice(&self.y);
        out.push(self.t);
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().chain(self.y.iter()).all(|c| c.is_finite())
    }

    /// `Pr₁(ξ) = (x, y)`.
    pub fn proj(&self) -> HorizontalVector {
        HorizontalVector {
            a: self.x.clone(),
            b: self.y.clone(),
        }
    }

    /// Group product `self ∘ other`. Panics on dimension mismatch; see [`group_mul`].
    #[inline]
    pub fn compose(&self, other: &HPoint) -> HPoint {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in group product");
        let x = self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect();
        let y = self.y.iter().zip(&other.y).map(|(a, b)| a + b).collect();
        let t = self.t + other.t + 2.0 * (dot(&other.x, &self.y) - dot(&self.x, &other.y));
        HPoint { x, y, t }
    }

    #[inline]
    pub fn inverse(&self) -> HPoint {
        HPoint {
            x: self.x.iter().map(|c| -c).collect(),
            y: self.y.iter().map(|c| -c).collect(),
            t: -self.t,
        }
    }

    /// `self ∘ exp(v)`. Panics on dimension mismatch; see [`exp_horizontal`].
    #[inline]
    pub fn exp_h(&self, v: &HorizontalVector) -> HPoint {
        assert_eq!(self.dim(), v.dim(), "dimension mismatch in horizontal exponential");
        let x = self.x.iter().zip(&v.a).map(|(p, q)| p + q).collect();
        let y = self.y.iter().zip(&v.b).map(|(p, q)| p + q).collect();
        let t = self.t + 2.0 * (dot(&v.a, &self.y) - dot(&self.x, &v.b));
        HPoint { x, y, t }
    }

    /// Homogeneous (Korányi) gauge `N(ξ)`.
    #[inline]
    pub fn gauge(&self) -> f64 {
        let h = sq(&self.x) + sq(&self.y);
        (h * h + self.t * self.t).sqrt().sqrt()
    }

    /// Signed defect of `self` from the horizontal plane `H_base`.
    #[inline]
    pub fn plane_defect(&self, base: &HPoint) -> f64 {
        self.t - base.t - 2.0 * (dot(&base.y, &self.x) - dot(&base.x, &self.y))
    }

    /// Largest absolute coordinate, used to scale tolerances.
    pub fn magnitude(&self) -> f64 {
        self.x
            .iter()
            .chain(self.y.iter())
            .map(|c| c.abs())
            .fold(self.t.abs(), f64::max)
    }
}

impl HorizontalVector {
    pub fn new(a: &[f64], b: &[f64]) -> Result<Self> {
        check_dims(a.len(), b.len())?;
        if a.is_empty() {
            return Err(HeisError::InvalidParameter("dimension n must be >= 1".into()));
        }
        Ok(HorizontalVector {
            a: Coords::from_slice(a),
            b: Coords::from_slice(b),
        })
    }

    pub fn h1(a: f64, b: f64) -> Self {
        HorizontalVector {
            a: Coords::from_slice(&[a]),
            b: Coords::from_slice(&[b]),
        }
    }

    pub fn zeros(n: usize) -> Self {
        HorizontalVector {
            a: Coords::from_elem(0.0, n),
            b: Coords::from_elem(0.0, n),
        }
    }

    /// Parses `[a_1..a_n, b_1..b_n]`.
    pub fn from_flat(c: &[f64]) -> Result<Self> {
        if c.is_empty() || !c.len().is_multiple_of(2) {
            return Err(HeisError::InvalidParameter(format!(
                "a horizontal vector needs 2n coordinates, got {}",
                c.len()
            )));
        }
        let n = c.len() / 2;
        HorizontalVector::new(&c[..n], &c[n..])
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.dim());
        out.extend_from_slice(&self.a);
        out.extend_from_slice(&self.b);
        out
    }

    /// The `k`-th coordinate of the flattened vector.
    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        let n = self.dim();
        if k < n {
            self.a[k]
        } else {
            self.b[k - n]
        }
    }

    #[inline]
    pub fn set(&mut self, k: usize, value: f64) {
        let n = self.dim();
        if k < n {
            self.a[k] = value
        } else {
            self.b[k - n] = value
        }
    }

    /// Unit basis vector `e_k` of R²ⁿ.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = HorizontalVector::zeros(n);
        v.set(k, 1.0);
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    #[inline]
    pub fn dot(&self, other: &HorizontalVector) -> f64 {
        dot(&self.a, &other.a) + dot(&self.b, &other.b)
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        sq(&self.a) + sq(&self.b)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn scale(&self, k: f64) -> HorizontalVector {
        HorizontalVector {
            a: self.a.iter().map(|c| c * k).collect(),
            b: self.b.iter().map(|c| c * k).collect(),
        }
    }

    #[inline]
    pub fn add(&self, other: &HorizontalVector) -> HorizontalVector {
        HorizontalVector {
            a: self.a.iter().zip(&other.a).map(|(p, q)| p + q).collect(),
            b: self.b.iter().zip(&other.b).map(|(p, q)| p + q).collect(),
        }
    }

    #[inline]
    pub fn sub(&self, other: &HorizontalVector) -> HorizontalVector {
        HorizontalVector {
            a: self.a.iter().zip(&other.a).map(|(p, q)| p - q).collect(),
            b: self.b.iter().zip(&other.b).map(|(p, q)| p - q).collect(),
        }
    }

    /// `self + k·other`.
    #[inline]
    pub fn axpy(&self, k: f64, other: &HorizontalVector) -> HorizontalVector {
        HorizontalVector {
            a: self.a.iter().zip(&other.a).map(|(p, q)| p + k * q).collect(),
            b: self.b.iter().zip(&other.b).map(|(p, q)| p + k * q).collect(),
        }
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<HorizontalVector> {
        let r = self.norm();
        (r > 0.0 && r.is_finite()).then(|| self.scale(1.0 / r))
    }

    /// The symplectic rotation `J(a, b) = (b, −a)`; `J(Pr₁ ξ)` is the normal of
    /// plane traces through `ξ`.
    pub fn rotate_j(&self) -> HorizontalVector {
        HorizontalVector {
            a: self.b.clone(),
            b: self.a.iter().map(|c| -c).collect(),
        }
    }

    /// The point `exp(v) = (a, b, 0)`.
    pub fn exp(&self) -> HPoint {
        HPoint {
            x: self.a.clone(),
            y: self.b.clone(),
            t: 0.0,
        }
    }
}

/// `p ∘ q`.
pub fn group_mul(p: &HPoint, q: &HPoint) -> Result<HPoint> {
    check_dims(p.dim(), q.dim())?;
    Ok(p.compose(q))
}

/// `p⁻¹ = (−x, −y, −t)`.
pub fn group_inv(p: &HPoint) -> HPoint {
    p.inverse()
}

/// Non-isotropic dilation `δ_λ(x, y, t) = (λx, λy, λ²t)`.
pub fn dilate(lambda: f64, p: &HPoint) -> Result<HPoint> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(HeisError::InvalidParameter(format!(
            "dilation factor must be positive, got {lambda}"
        )));
    }
    Ok(HPoint {
        x: p.x.iter().map(|c| lambda * c).collect(),
        y: p.y.iter().map(|c| lambda * c).collect(),
        t: lambda * lambda * p.t,
    })
}

/// `N(ξ) = ((‖x‖² + ‖y‖²)² + t²)^{1/4}`.
pub fn gauge_norm(p: &HPoint) -> f64 {
    p.gauge()
}

/// Korányi–Cygan distance `d_g(p, q) = N(q⁻¹ ∘ p)`.
pub fn gauge_dist(p: &HPoint, q: &HPoint) -> Result<f64> {
    check_dims(p.dim(), q.dim())?;
    Ok(q.inverse().compose(p).gauge())
}

/// `p ∘ exp(v) = (x + a, y + b, t + 2(a·y − x·b))`.
pub fn exp_horizontal(p: &HPoint, v: &HorizontalVector) -> Result<HPoint> {
    check_dims(p.dim(), v.dim())?;
    Ok(p.exp_h(v))
}

/// Whether `p` lies on the horizontal plane `H_{p0}` within `tol`.
pub fn on_horizontal_plane(p0: &HPoint, p: &HPoint, tol: f64) -> bool {
    p0.dim() == p.dim() && p.plane_defect(p0).abs() <= tol
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Proper,
    Identical,
    Empty,
}

/// The set `{v ∈ R²ⁿ : normal·v = offset}` of plane coordinates `v` of
/// `base ∘ exp(v)` whose horizontal plane contains a fixed second point.
///
/// For `n = 1` a proper trace is a line; for `n > 1` it is a hyperplane of
/// dimension `2n − 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneTrace {
    pub base: HPoint,
    pub normal: HorizontalVector,
    pub offset: f64,
    pub kind: TraceKind,
}

impl PlaneTrace {
    /// Point of the trace closest to the origin of the plane coordinates.
    pub fn foot(&self) -> HorizontalVector {
        let nn = self.normal.norm_sq();
        if nn > 0.0 {
            self.normal.scale(self.offset / nn)
        } else {
            HorizontalVector::zeros(self.normal.dim())
        }
    }

    pub fn contains(&self, v: &HorizontalVector, tol: f64) -> bool {
        match self.kind {
            TraceKind::Identical => true,
            TraceKind::Empty => false,
            TraceKind::Proper => (self.normal.dot(v) - self.offset).abs() <= tol,
        }
    }

    /// Orthonormal basis of the directions inside the trace (`2n − 1` vectors
    /// for a proper trace).
    pub fn tangent_basis(&self) -> Vec<HorizontalVector> {
        let n = self.normal.dim();
        let mut basis: Vec<HorizontalVector> = Vec::with_capacity(2 * n);
        if let Some(u) = self.normal.normalized() {
            basis.push(u);
        }
        let skip = basis.len();
        for k in 0..2 * n {
            let mut w = HorizontalVector::basis(n, k);
            for b in &basis {
                w = w.axpy(-w.dot(b), b);
            }
            for b in &basis {
                w = w.axpy(-w.dot(b), b);
            }
            if let Some(u) = w.normalized() {
                if w.norm() > 1e-8 {
                    basis.push(u);
                }
            }
            if basis.len() == 2 * n {
                break;
            }
        }
        basis.split_off(skip)
    }
}

/// Trace of `H_{p0} ∩ {ζ : p1 ∈ H_ζ}` in the plane coordinates of `H_{p0}`.
///
/// With `p0⁻¹ ∘ p1 = (X, Y, T)`, `p0 ∘ exp(a, b)` qualifies iff
/// `a·Y − b·X = −T/2`.
pub fn plane_trace(p0: &HPoint, p1: &HPoint) -> Result<PlaneTrace> {
    check_dims(p0.dim(), p1.dim())?;
    let rel = p0.inverse().compose(p1);
    let normal = rel.proj().rotate_j();
    let offset = -0.5 * rel.t;
    let kind = if normal.norm_sq() > 0.0 {
        TraceKind::Proper
    } else if offset == 0.0 {
        TraceKind::Identical
    } else {
        TraceKind::Empty
    };
    Ok(PlaneTrace {
        base: p0.clone(),
        normal,
        offset,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &HPoint, b: &HPoint, tol: f64) -> bool {
        a.to_flat().iter().zip(b.to_flat()).all(|(p, q)| (p - q).abs() <= tol)
    }

    #[test]
    fn product_examples() {
        let p = group_mul(&HPoint::h1(1.0, 0.0, 0.0), &HPoint::h1(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(p, HPoint::h1(1.0, 1.0, -2.0));
        let xi = HPoint::h1(0.3, -1.2, 4.0);
        assert_eq!(group_mul(&xi, &HPoint::identity(1)).unwrap(), xi);
        let a = HPoint::h1(1.0, 0.0, 0.0);
        let b = HPoint::h1(0.0, 1.0, 0.0);
        let c = HPoint::h1(0.0, 0.0, 5.0);
        assert_eq!(a.compose(&b).compose(&c), a.compose(&b.compose(&c)));
    }

    #[test]
    fn product_rejects_mixed_dimensions() {
        let p = HPoint::identity(1);
        let q = HPoint::identity(2);
        assert_eq!(
            group_mul(&p, &q),
            Err(HeisError::DimensionMismatch { expected: 1, got: 2 })
        );
        assert!(gauge_dist(&p, &q).is_err());
        assert!(exp_horizontal(&p, &HorizontalVector::zeros(2)).is_err());
        assert!(HPoint::new(&[1.0], &[1.0, 2.0], 0.0).is_err());
        assert!(HPoint::from_flat(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(group_inv(&HPoint::identity(2)), HPoint::identity(2));
        assert_eq!(group_inv(&HPoint::h1(1.0, 2.0, 3.0)), HPoint::h1(-1.0, -2.0, -3.0));
        let p = HPoint::h1(1.0, 1.0, -2.0);
        assert_eq!(p.compose(&group_inv(&p)), HPoint::identity(1));
    }

    #[test]
    fn dilation_examples() {
        assert_eq!(dilate(2.0, &HPoint::h1(1.0, 1.0, 1.0)).unwrap(), HPoint::h1(2.0, 2.0, 4.0));
        let p = HPoint::h1(0.4, -0.7, 2.5);
        assert_eq!(dilate(1.0, &p).unwrap(), p);
        assert!(dilate(0.0, &p).is_err());
        assert!(dilate(-1.0, &p).is_err());
        let lam = 3.7;
        let d = dilate(lam, &p).unwrap();
        assert!((gauge_norm(&d) - lam * gauge_norm(&p)).abs() < 1e-12);
    }

    #[test]
    fn gauge_examples() {
        assert_eq!(gauge_norm(&HPoint::identity(3)), 0.0);
        assert_eq!(gauge_norm(&HPoint::h1(0.0, 0.0, 1.0)), 1.0);
        let eight = 8f64.powf(0.25);
        assert!((gauge_norm(&HPoint::h1(1.0, 1.0, -2.0)) - eight).abs() < 1e-15);
        let e = HPoint::identity(1);
        assert!((gauge_dist(&e, &HPoint::h1(1.0, 1.0, -2.0)).unwrap() - eight).abs() < 1e-15);
        let xi = HPoint::h1(0.2, 0.9, -1.0);
        assert_eq!(gauge_dist(&xi, &xi).unwrap(), 0.0);
    }

    #[test]
    fn exponential_examples() {
        let e = HPoint::identity(1);
        assert_eq!(exp_horizontal(&e, &HorizontalVector::h1(1.0, 0.0)).unwrap(), HPoint::h1(1.0, 0.0, 0.0));
        let p = exp_horizontal(&HPoint::h1(1.0, 0.0, 0.0), &HorizontalVector::h1(0.0, 1.0)).unwrap();
        assert_eq!(p, HPoint::h1(1.0, 1.0, -2.0));
        // exp agrees with the group product by (a, b, 0)
        let q = HPoint::h1(0.3, -0.2, 1.1);
        let v = HorizontalVector::h1(-0.5, 2.0);
        assert!(close(&q.exp_h(&v), &q.compose(&v.exp()), 1e-15));
    }

    #[test]
    fn plane_membership_examples() {
        let p0 = HPoint::h1(0.5, -0.5, 2.0);
        assert!(on_horizontal_plane(&p0, &p0, 1e-9));
        let e = HPoint::identity(1);
        assert!(on_horizontal_plane(&e, &HPoint::h1(1.0, 1.0, 0.0), 1e-9));
        assert!(!on_horizontal_plane(&e, &HPoint::h1(0.0, 0.0, 1.0), 1e-9));
    }

    #[test]
    fn plane_trace_examples() {
        let p0 = HPoint::h1(0.3, 0.1, -0.4);
        assert_eq!(plane_trace(&p0, &p0).unwrap().kind, TraceKind::Identical);

        let e = HPoint::identity(1);
        let tr = plane_trace(&e, &HPoint::h1(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(tr.kind, TraceKind::Proper);
        // 2(b·1) = 0, i.e. b = 0
        assert!(tr.contains(&HorizontalVector::h1(7.0, 0.0), 1e-12));
        assert!(!tr.contains(&HorizontalVector::h1(0.0, 0.5), 1e-12));

        // Every horizontal plane through a point of t = 0 meets the t-axis
        // only at height 0, so nothing on H_e sees (0, 0, 1).
        assert_eq!(plane_trace(&e, &HPoint::h1(0.0, 0.0, 1.0)).unwrap().kind, TraceKind::Empty);

        // Off-plane target with a nonempty trace: b = 1/2.
        let tr = plane_trace(&e, &HPoint::h1(1.0, 0.0, 1.0)).unwrap();
        assert_eq!(tr.kind, TraceKind::Proper);
        assert!(tr.offset != 0.0);
        let zeta = e.exp_h(&HorizontalVector::h1(-3.0, 0.5));
        assert!(on_horizontal_plane(&zeta, &HPoint::h1(1.0, 0.0, 1.0), 1e-12));
    }

    #[test]
    fn trace_points_see_the_target() {
        let p0 = HPoint::new(&[0.3, -1.0], &[0.7, 0.2], 0.9).unwrap();
        let p1 = HPoint::new(&[-0.4, 0.5], &[1.1, -0.6], -2.0).unwrap();
        let tr = plane_trace(&p0, &p1).unwrap();
        assert_eq!(tr.kind, TraceKind::Proper);
        let basis = tr.tangent_basis();
        assert_eq!(basis.len(), 3);
        let foot = tr.foot();
        for (k, b) in basis.iter().enumerate() {
            assert!(b.dot(&tr.normal).abs() < 1e-12);
            let v = foot.axpy(0.7 * (k as f64 + 1.0), b);
            let zeta = p0.exp_h(&v);
            assert!(on_horizontal_plane(&zeta, &p1, 1e-12));
        }
    }
}
