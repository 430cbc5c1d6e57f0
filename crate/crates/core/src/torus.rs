//! Flat-torus primitives: points, tangent vectors, the induced metric and
//! the covering lattices `L(delta)`.
//!
//! Points are always stored by their canonical representative in `[0,1)^2`.
//! Tangent vectors live in the global trivialization of `T(R^2/Z^2)`, so
//! vectors at different base points can be compared directly.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduce a real number into `[0, 1)`.
#[inline]
pub fn wrap_unit(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    // rem_euclid can return 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Representative of `v mod 1` in `[-1/2, 1/2)`.
#[inline]
pub fn wrap_signed(v: f64) -> f64 {
    let r = wrap_unit(v + 0.5) - 0.5;
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    x: f64,
    y: f64,
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Self {
        TorusPoint {
            x: wrap_unit(x),
            y: wrap_unit(y),
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Coordinates as a pair, each in `[0,1)`.
    pub fn coords(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// Coordinates with each component in `[-1/2, 1/2)`.
    pub fn signed_coords(&self) -> [f64; 2] {
        [wrap_signed(self.x), wrap_signed(self.y)]
    }

    /// `exp_z(v) = z + v`.
    pub fn exp(&self, v: TangentVector) -> TorusPoint {
        TorusPoint::new(self.x + v.vx, self.y + v.vy)
    }

    /// Shortest displacement `w` with `self.exp(w) == other`.
    pub fn displacement_to(&self, other: &TorusPoint) -> TangentVector {
        TangentVector::new(wrap_signed(other.x - self.x), wrap_signed(other.y - self.y))
    }

    /// Membership in the annulus `(R/Z) x [-1/3, 1/3]`, reading `y` by its
    /// signed representative.
    pub fn in_annulus(&self) -> bool {
        wrap_signed(self.y).abs() <= 1.0 / 3.0
    }
}

/// Flat torus distance: minimum over integer translates of the Euclidean
/// distance. The shortest-representative reduction is equivalent to scanning
/// the nine nearest translates.
pub fn torus_dist(p: &TorusPoint, q: &TorusPoint) -> f64 {
    p.displacement_to(q).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TangentVector {
    pub vx: f64,
    pub vy: f64,
}

impl TangentVector {
    pub const fn new(vx: f64, vy: f64) -> Self {
        TangentVector { vx, vy }
    }

    pub fn from_angle(phi: f64) -> Self {
        TangentVector::new(phi.cos(), phi.sin())
    }

    pub fn norm(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn norm_sq(&self) -> f64 {
        self.vx * self.vx + self.vy * self.vy
    }

    pub fn dot(&self, o: &TangentVector) -> f64 {
        self.vx * o.vx + self.vy * o.vy
    }

    /// `det[self, o]`.
    pub fn cross(&self, o: &TangentVector) -> f64 {
        self.vx * o.vy - self.vy * o.vx
    }

    /// Counter-clockwise quarter turn.
    pub fn perp(&self) -> TangentVector {
        TangentVector::new(-self.vy, self.vx)
    }

    pub fn is_zero(&self) -> bool {
        self.vx == 0.0 && self.vy == 0.0
    }

    pub fn normalized(&self) -> Result<TangentVector> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Domain("cannot normalize a zero vector".into()));
        }
        Ok(*self * (1.0 / n))
    }

    pub fn angle_of(&self) -> f64 {
        self.vy.atan2(self.vx)
    }

    pub fn rotated(&self, phi: f64) -> TangentVector {
        let (s, c) = phi.sin_cos();
        TangentVector::new(c * self.vx - s * self.vy, s * self.vx + c * self.vy)
    }
}

impl Add for TangentVector {
    type Output = TangentVector;
    fn add(self, o: TangentVector) -> TangentVector {
        TangentVector::new(self.vx + o.vx, self.vy + o.vy)
    }
}

impl Sub for TangentVector {
    type Output = TangentVector;
    fn sub(self, o: TangentVector) -> TangentVector {
        TangentVector::new(self.vx - o.vx, self.vy - o.vy)
    }
}

impl Neg for TangentVector {
    type Output = TangentVector;
    fn neg(self) -> TangentVector {
        TangentVector::new(-self.vx, -self.vy)
    }
}

impl Mul<f64> for TangentVector {
    type Output = TangentVector;
    fn mul(self, s: f64) -> TangentVector {
        TangentVector::new(self.vx * s, self.vy * s)
    }
}

pub fn perp(v: TangentVector) -> TangentVector {
    v.perp()
}

/// Angle between two nonzero vectors, in `[0, pi]`.
pub fn angle(u: &TangentVector, v: &TangentVector) -> Result<f64> {
    if u.is_zero() || v.is_zero() {
        return Err(Error::Domain("angle of a zero vector".into()));
    }
    Ok(u.cross(v).abs().atan2(u.dot(v)))
}

/// Angle between the lines spanned by two nonzero vectors, in `[0, pi/2]`.
pub fn line_angle(u: &TangentVector, v: &TangentVector) -> Result<f64> {
    let a = angle(u, v)?;
    Ok(a.min(PI - a))
}

/// Signed angle from `from` to `to`, in `(-pi, pi]`.
pub fn signed_angle(from: &TangentVector, to: &TangentVector) -> f64 {
    from.cross(to).atan2(from.dot(to))
}

/// 2x2 real matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, v: TangentVector) -> TangentVector {
        TangentVector::new(self.a * v.vx + self.b * v.vy, self.c * v.vx + self.d * v.vy)
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Mat2::new(
            self.d / det,
            -self.b / det,
            -self.c / det,
            self.a / det,
        ))
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn frobenius(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    /// Singular values `(s_max, s_min)`.
    pub fn singular_values(&self) -> (f64, f64) {
        let f2 = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let det = self.det().abs();
        let disc = (f2 * f2 - 4.0 * det * det).max(0.0).sqrt();
        let smax = ((f2 + disc) / 2.0).sqrt();
        let smin = if smax > 0.0 { det / smax } else { 0.0 };
        (smax, smin)
    }

    /// Operator norm.
    pub fn norm(&self) -> f64 {
        self.singular_values().0
    }

    /// Real eigenvalues, largest modulus first, with unit eigenvectors.
    pub fn real_eigen(&self) -> Option<[(f64, TangentVector); 2]> {
        let tr = self.a + self.d;
        let det = self.det();
        let disc = tr * tr / 4.0 - det;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        let (l1, l2) = (tr / 2.0 + s, tr / 2.0 - s);
        let (big, small) = if l1.abs() >= l2.abs() {
            (l1, l2)
        } else {
            (l2, l1)
        };
        let vec_for = |l: f64| -> TangentVector {
            // (A - l I) v = 0; use the row with the larger entries
            let r1 = TangentVector::new(self.a - l, self.b);
            let r2 = TangentVector::new(self.c, self.d - l);
            let row = if r1.norm_sq() >= r2.norm_sq() { r1 } else { r2 };
            if row.norm_sq() < 1e-300 {
                TangentVector::new(1.0, 0.0)
            } else {
                row.perp()
                    .normalized()
                    .unwrap_or(TangentVector::new(1.0, 0.0))
            }
        };
        Some([(big, vec_for(big)), (small, vec_for(small))])
    }
}

/// The lattice `L(delta)`: points whose coordinates are multiples of
/// `1/(floor(1/delta) + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    per_axis: usize,
    spacing: f64,
}

impl Lattice {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!(
                "lattice radius {delta} not in (0,1)"
            )));
        }
        let per_axis = (1.0 / delta).floor() as usize + 1;
        Ok(Lattice {
            per_axis,
            spacing: 1.0 / per_axis as f64,
        })
    }

    /// Lattice with an explicit number of points per axis.
    pub fn with_points_per_axis(per_axis: usize) -> Result<Self> {
        if per_axis == 0 {
            return Err(Error::Domain(
                "lattice needs at least one point per axis".into(),
            ));
        }
        Ok(Lattice {
            per_axis,
            spacing: 1.0 / per_axis as f64,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn len(&self) -> usize {
        self.per_axis * self.per_axis
    }

    pub fn is_empty(&self) -> bool {
        self.per_axis == 0
    }

    pub fn points(&self) -> impl Iterator<Item = TorusPoint> + '_ {
        let n = self.per_axis;
        (0..n * n).map(move |k| {
            TorusPoint::new((k / n) as f64 * self.spacing, (k % n) as f64 * self.spacing)
        })
    }

    /// Lattice point closest to `z`.
    pub fn nearest(&self, z: &TorusPoint) -> TorusPoint {
        let n = self.per_axis as f64;
        let ix = (z.x() * n).round() % n;
        let iy = (z.y() * n).round() % n;
        TorusPoint::new(ix * self.spacing, iy * self.spacing)
    }
}

pub fn lattice(delta: f64) -> Result<Lattice> {
    Lattice::new(delta)
}
