//! Fixed-size 2D geometry used throughout the crate.
//!
//! Observations are fixation locations in pixel coordinates, so every vector
//! is a [`Point2`] and every covariance / precision is a [`SymMat2`].

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// A 2D point (or vector) in pixel coordinates. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(&self, other: &Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Outer product `self selfᵀ`.
    pub fn outer(&self) -> SymMat2 {
        SymMat2::new(self.x * self.x, self.x * self.y, self.y * self.y)
    }

    /// Total order used to canonicalize data independent of input order.
    pub fn total_cmp(&self, other: &Point2) -> std::cmp::Ordering {
        self.x.total_cmp(&other.x).then(self.y.total_cmp(&other.y))
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, rhs: Point2) -> Point2 {
        Point2::new(self * rhs.x, self * rhs.y)
    }
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
///
/// Serialized as a nested row-major array; deserialization rejects input
/// whose off-diagonal entries disagree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct SymMat2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

/// Eigen-decomposition of a [`SymMat2`]: `values[i]` pairs with the unit
/// column vector `vectors[i]`, and `values[0] >= values[1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    pub values: [f64; 2],
    pub vectors: [Point2; 2],
}

impl SymMat2 {
    pub const IDENTITY: SymMat2 = SymMat2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        SymMat2 { xx, xy, yy }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        SymMat2 {
            xx: a,
            xy: 0.0,
            yy: b,
        }
    }

    pub fn scaled_identity(s: f64) -> Self {
        SymMat2::diag(s, s)
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }

    /// Inverse, or `None` when the determinant is not strictly positive.
    pub fn inverse(&self) -> Option<SymMat2> {
        let det = self.det();
        if !(det > 0.0) || !det.is_finite() {
            return None;
        }
        Some(SymMat2::new(self.yy / det, -self.xy / det, self.xx / det))
    }

    pub fn scale(&self, s: f64) -> SymMat2 {
        SymMat2::new(self.xx * s, self.xy * s, self.yy * s)
    }

    /// Quadratic form `vᵀ M v`.
    pub fn quad(&self, v: &Point2) -> f64 {
        self.xx * v.x * v.x + 2.0 * self.xy * v.x * v.y + self.yy * v.y * v.y
    }

    pub fn mul_vec(&self, v: &Point2) -> Point2 {
        Point2::new(
            self.xx * v.x + self.xy * v.y,
            self.xy * v.x + self.yy * v.y,
        )
    }

    /// `tr(self · other)` for two symmetric matrices.
    pub fn trace_product(&self, other: &SymMat2) -> f64 {
        self.xx * other.xx + 2.0 * self.xy * other.xy + self.yy * other.yy
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = self`, as `(l11, l21, l22)`.
    pub fn cholesky(&self) -> Option<(f64, f64, f64)> {
        if !(self.xx > 0.0) {
            return None;
        }
        let l11 = self.xx.sqrt();
        let l21 = self.xy / l11;
        let rem = self.yy - l21 * l21;
        if !(rem > 0.0) {
            return None;
        }
        Some((l11, l21, rem.sqrt()))
    }

    pub fn eigen(&self) -> Eigen2 {
        let half_tr = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let rad = half_diff.hypot(self.xy);
        let l1 = half_tr + rad;
        // Recover the smaller eigenvalue through the determinant to avoid
        // cancellation when the matrix is strongly anisotropic.
        let l2 = if l1 != 0.0 {
            self.det() / l1
        } else {
            half_tr - rad
        };
        let v1 = if self.xy == 0.0 {
            if self.xx >= self.yy {
                Point2::new(1.0, 0.0)
            } else {
                Point2::new(0.0, 1.0)
            }
        } else {
            // (l1 - yy, xy) and (xy, l1 - xx) both span the eigenspace; take
            // the longer one for accuracy.
            let a = Point2::new(l1 - self.yy, self.xy);
            let b = Point2::new(self.xy, l1 - self.xx);
            let v = if a.norm() >= b.norm() { a } else { b };
            (1.0 / v.norm()) * v
        };
        let v2 = Point2::new(-v1.y, v1.x);
        Eigen2 {
            values: [l1, l2],
            vectors: [v1, v2],
        }
    }

    /// Rebuild `V diag(values) Vᵀ` from an eigenbasis.
    pub fn from_eigen(values: [f64; 2], vectors: [Point2; 2]) -> SymMat2 {
        let [v1, v2] = vectors;
        let [a, b] = values;
        SymMat2::new(
            a * v1.x * v1.x + b * v2.x * v2.x,
            a * v1.x * v1.y + b * v2.x * v2.y,
            a * v1.y * v1.y + b * v2.y * v2.y,
        )
    }
}

impl Add for SymMat2 {
    type Output = SymMat2;
    fn add(self, rhs: SymMat2) -> SymMat2 {
        SymMat2::new(self.xx + rhs.xx, self.xy + rhs.xy, self.yy + rhs.yy)
    }
}

impl Sub for SymMat2 {
    type Output = SymMat2;
    fn sub(self, rhs: SymMat2) -> SymMat2 {
        SymMat2::new(self.xx - rhs.xx, self.xy - rhs.xy, self.yy - rhs.yy)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("matrix is not symmetric: off-diagonal entries {0} and {1} differ")]
pub struct AsymmetricMatrix(pub f64, pub f64);

impl TryFrom<[[f64; 2]; 2]> for SymMat2 {
    type Error = AsymmetricMatrix;

    fn try_from(m: [[f64; 2]; 2]) -> Result<Self, Self::Error> {
        let (b, c) = (m[0][1], m[1][0]);
        let scale = m[0][0].abs().max(m[1][1].abs()).max(b.abs());
        if (b - c).abs() > 1e-12 * scale {
            return Err(AsymmetricMatrix(b, c));
        }
        Ok(SymMat2::new(m[0][0], b, m[1][1]))
    }
}

impl From<SymMat2> for [[f64; 2]; 2] {
    fn from(m: SymMat2) -> Self {
        [[m.xx, m.xy], [m.xy, m.yy]]
    }
}
