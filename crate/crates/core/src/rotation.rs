//! The cyclic group Z4 of planar quarter turns and its 2x2 matrix form.
//!
//! `Rotation(q)` is a counter-clockwise turn by `q * 90` degrees and maps to
//! the matrix `[[0, -1], [1, 0]]^q`. Pixel rotation in [`crate::puzzle`] uses
//! the same handedness.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Rotation(u8);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation(0);
    pub const QUARTER: Rotation = Rotation(1);
    pub const HALF: Rotation = Rotation(2);
    pub const ALL: [Rotation; 4] = [Rotation(0), Rotation(1), Rotation(2), Rotation(3)];

    pub fn new(quarter_turns: i64) -> Self {
        Rotation(quarter_turns.rem_euclid(4) as u8)
    }

    pub fn quarter_turns(self) -> u8 {
        self.0
    }

    pub fn inverse(self) -> Self {
        Rotation((4 - self.0) % 4)
    }

    pub fn as_matrix(self) -> Mat2 {
        match self.0 {
            0 => Mat2::new([[1.0, 0.0], [0.0, 1.0]]),
            1 => Mat2::new([[0.0, -1.0], [1.0, 0.0]]),
            2 => Mat2::new([[-1.0, 0.0], [0.0, -1.0]]),
            _ => Mat2::new([[0.0, 1.0], [-1.0, 0.0]]),
        }
    }

    /// Exact inverse of [`Rotation::as_matrix`]; `None` unless `m` is one of
    /// the four Z4 matrices within `tol` in every entry.
    pub fn from_matrix(m: &Mat2, tol: f64) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_matrix().max_abs_diff(m) <= tol)
    }
}

impl Add for Rotation {
    type Output = Rotation;
    fn add(self, rhs: Rotation) -> Rotation {
        Rotation((self.0 + rhs.0) % 4)
    }
}

impl Sub for Rotation {
    type Output = Rotation;
    fn sub(self, rhs: Rotation) -> Rotation {
        self + rhs.inverse()
    }
}

impl Neg for Rotation {
    type Output = Rotation;
    fn neg(self) -> Rotation {
        self.inverse()
    }
}

impl fmt::Display for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}deg", self.0 as u32 * 90)
    }
}

/// Row-major 2x2 real matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn new(m: [[f64; 2]; 2]) -> Self {
        Mat2(m)
    }

    pub fn transpose(&self) -> Mat2 {
        let m = self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn det(&self) -> f64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn scale(&self, k: f64) -> Mat2 {
        let m = self.0;
        Mat2([[m[0][0] * k, m[0][1] * k], [m[1][0] * k, m[1][1] * k]])
    }

    /// Frobenius inner product `tr(selfᵀ other)`.
    pub fn dot(&self, other: &Mat2) -> f64 {
        let (a, b) = (self.0, other.0);
        a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut d: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                d = d.max((self.0[r][c] - other.0[r][c]).abs());
            }
        }
        d
    }

    /// Orthogonal polar factor `U Vᵀ` of the singular value decomposition.
    ///
    /// Computed in closed form: a 2x2 matrix splits into a similarity part
    /// `[[p, -q], [q, p]]` and an anti-similarity part `[[r, s], [s, -r]]`;
    /// the nearest orthogonal matrix is the normalized larger of the two.
    pub fn polar_factor(&self) -> Mat2 {
        let m = self.0;
        let p = 0.5 * (m[0][0] + m[1][1]);
        let q = 0.5 * (m[1][0] - m[0][1]);
        let r = 0.5 * (m[0][0] - m[1][1]);
        let s = 0.5 * (m[1][0] + m[0][1]);
        let rot = (p * p + q * q).sqrt();
        let refl = (r * r + s * s).sqrt();
        if rot >= refl {
            if rot == 0.0 {
                return Mat2::new([[1.0, 0.0], [0.0, 1.0]]);
            }
            Mat2([[p / rot, -q / rot], [q / rot, p / rot]])
        } else {
            Mat2([[r / refl, s / refl], [s / refl, -r / refl]])
        }
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}
