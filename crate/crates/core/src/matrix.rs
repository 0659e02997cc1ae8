//! 2x2 matrices over Q_p.

use std::fmt;

use crate::error::Result;
use crate::padic::{PAdicScalar, Valuation};

/// `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub a: PAdicScalar,
    pub b: PAdicScalar,
    pub c: PAdicScalar,
    pub d: PAdicScalar,
}

impl Mat2 {
    pub fn new(a: PAdicScalar, b: PAdicScalar, c: PAdicScalar, d: PAdicScalar) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn from_ints(p: u64, m: [[i128; 2]; 2], prec: u32) -> Self {
        let s = |x| PAdicScalar::from_int(p, x, prec);
        Mat2::new(s(m[0][0]), s(m[0][1]), s(m[1][0]), s(m[1][1]))
    }

    pub fn identity(p: u64, prec: u32) -> Self {
        Self::from_ints(p, [[1, 0], [0, 1]], prec)
    }

    pub fn prime(&self) -> u64 {
        self.a.prime()
    }

    pub fn entries(&self) -> [PAdicScalar; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> PAdicScalar {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> PAdicScalar {
        self.a + self.d
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }

    pub fn scale(&self, s: &PAdicScalar) -> Mat2 {
        Mat2::new(*s * self.a, *s * self.b, *s * self.c, *s * self.d)
    }

    /// Adjugate `[[d, -b], [-c, a]]`.
    pub fn adjugate(&self) -> Mat2 {
        Mat2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn inverse(&self) -> Result<Mat2> {
        let det_inv = self.det().inverse()?;
        Ok(self.adjugate().scale(&det_inv))
    }

    /// Coordinate swap `J g J`: `[[d, c], [b, a]]`.
    pub fn swapped(&self) -> Mat2 {
        Mat2::new(self.d, self.c, self.b, self.a)
    }

    pub fn min_valuation(&self) -> Valuation {
        self.entries().iter().map(|e| e.valuation()).min().unwrap()
    }

    pub fn is_integral(&self) -> bool {
        self.min_valuation() >= Valuation::Finite(0)
    }

    /// `g x g^{-1}`.
    pub fn conjugate(&self, x: &Mat2) -> Result<Mat2> {
        Ok(self.mul(x).mul(&self.inverse()?))
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.a, self.b, self.c, self.d)
    }
}
