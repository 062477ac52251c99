//! Real intervals, interval matrices, and the enclosure of an interval-matrix
//! product with a constrained zonotope.
//!
//! Arithmetic uses round-to-nearest; no directed rounding is performed.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::czono::ConstrainedZonotope;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}] is reversed");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn rad(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn div(self, rhs: Interval) -> Result<Interval> {
        if rhs.lo <= 0.0 && rhs.hi >= 0.0 {
            return Err(Error::DivisionByZeroInterval { lo: rhs.lo, hi: rhs.hi });
        }
        Ok(corners(self, rhs, |a, b| a / b))
    }

    /// `self^k` with the tight even-power rule.
    pub fn powi(self, k: u32) -> Interval {
        match k {
            0 => Interval::point(1.0),
            1 => self,
            _ => {
                let lo = self.lo.powi(k as i32);
                let hi = self.hi.powi(k as i32);
                if k % 2 == 1 {
                    Interval::new(lo, hi)
                } else if self.lo >= 0.0 {
                    Interval::new(lo, hi)
                } else if self.hi <= 0.0 {
                    Interval::new(hi, lo)
                } else {
                    Interval::new(0.0, lo.max(hi))
                }
            }
        }
    }
}

fn corners(a: Interval, b: Interval, op: impl Fn(f64, f64) -> f64) -> Interval {
    let c = [op(a.lo, b.lo), op(a.lo, b.hi), op(a.hi, b.lo), op(a.hi, b.hi)];
    let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Interval::new(lo, hi)
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::new(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        corners(self, rhs, |a, b| a * b)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn iv_arith(op: ArithOp, a: Interval, b: Interval) -> Result<Interval> {
    Ok(match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul => a * b,
        ArithOp::Div => a.div(b)?,
    })
}

/// Elementwise-bounded matrix `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    lo: DMatrix<f64>,
    hi: DMatrix<f64>,
}

impl IntervalMatrix {
    pub fn new(lo: DMatrix<f64>, hi: DMatrix<f64>) -> Result<Self> {
        if lo.shape() != hi.shape() {
            return Err(Error::DimensionMismatch {
                context: "interval matrix bounds",
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::Invalid("interval matrix has lo > hi".into()));
        }
        Ok(IntervalMatrix { lo, hi })
    }

    pub fn degenerate(m: DMatrix<f64>) -> Self {
        IntervalMatrix { lo: m.clone(), hi: m }
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> Interval) -> Self {
        let mut lo = DMatrix::zeros(nrows, ncols);
        let mut hi = DMatrix::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                let v = f(i, j);
                lo[(i, j)] = v.lo;
                hi[(i, j)] = v.hi;
            }
        }
        IntervalMatrix { lo, hi }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.lo.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> Interval {
        Interval::new(self.lo[(i, j)], self.hi[(i, j)])
    }

    pub fn lo(&self) -> &DMatrix<f64> {
        &self.lo
    }

    pub fn hi(&self) -> &DMatrix<f64> {
        &self.hi
    }

    pub fn center(&self) -> DMatrix<f64> {
        (&self.lo + &self.hi) * 0.5
    }

    pub fn radius(&self) -> DMatrix<f64> {
        (&self.hi - &self.lo) * 0.5
    }

    pub fn contains(&self, m: &DMatrix<f64>) -> bool {
        m.shape() == self.shape()
            && m.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }
}

/// Constrained-zonotope enclosure of `{M x : M ∈ [J], x ∈ Z}`.
///
/// With `J = J_c ± J_r` and `□Z = z_c ± z_r`, returns
/// `J_c Z ⊕ Box(J_r (|z_c| + z_r))`, since `|(M - J_c) x| ≤ J_r |x|`.
pub fn im_cz_enclosure(j: &IntervalMatrix, z: &ConstrainedZonotope) -> Result<ConstrainedZonotope> {
    if j.shape().1 != z.dim() {
        return Err(Error::DimensionMismatch {
            context: "interval matrix times set",
            expected: z.dim(),
            found: j.shape().1,
        });
    }
    let hull = z.interval_hull()?;
    let mag = DVector::from_iterator(hull.len(), hull.iter().map(|iv| iv.mid().abs() + iv.rad()));
    let radius = j.radius() * mag;
    let image = z.linear_map(&j.center())?;
    let spread = ConstrainedZonotope::from_center_radius(DVector::zeros(radius.len()), radius);
    image.minkowski_sum(&spread)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi)
    }

    #[test]
    fn arithmetic_examples() {
        assert_eq!(iv_arith(ArithOp::Add, iv(1.0, 2.0), iv(3.0, 4.0)).unwrap(), iv(4.0, 6.0));
        assert_eq!(iv_arith(ArithOp::Div, iv(2.0, 4.0), iv(1.0, 2.0)).unwrap(), iv(1.0, 4.0));
        assert_eq!(iv_arith(ArithOp::Sub, iv(1.0, 2.0), iv(3.0, 4.0)).unwrap(), iv(-3.0, -1.0));
    }

    #[test]
    fn product_matches_corner_enumeration() {
        let (a, b) = (iv(-1.0, 2.0), iv(-3.0, 1.0));
        let corners = [a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi];
        let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (-6.0, 3.0));
        assert_eq!(a * b, iv(lo, hi));
    }

    #[test]
    fn division_by_zero_interval() {
        assert!(matches!(
            iv_arith(ArithOp::Div, iv(1.0, 2.0), iv(-1.0, 1.0)),
            Err(Error::DivisionByZeroInterval { .. })
        ));
        assert!(iv(1.0, 2.0).div(iv(0.0, 1.0)).is_err());
    }

    #[test]
    fn even_powers_are_nonnegative() {
        assert_eq!(iv(-1.0, 1.0).powi(2), iv(0.0, 1.0));
        assert_eq!(iv(-3.0, -2.0).powi(2), iv(4.0, 9.0));
        assert_eq!(iv(-2.0, 1.0).powi(3), iv(-8.0, 1.0));
        assert_eq!(iv(-2.0, 1.0).powi(0), iv(1.0, 1.0));
    }

    #[test]
    fn interval_matrix_validation() {
        let lo = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let hi = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(IntervalMatrix::new(lo, hi).is_err());
    }

    #[test]
    fn degenerate_matrix_enclosure_is_linear_map() {
        let z = ConstrainedZonotope::from_bounds(&[0.0, -1.0], &[1.0, 1.0]);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let enc = im_cz_enclosure(&IntervalMatrix::degenerate(m.clone()), &z).unwrap();
        let direct = z.linear_map(&m).unwrap();
        assert_eq!(enc.center(), direct.center());
        assert_eq!(enc.generators().columns(0, 2), direct.generators().columns(0, 2));
        assert!(enc.generators().columns(2, 2).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scalar_enclosure_covers_endpoint_products() {
        let j = IntervalMatrix::new(DMatrix::from_element(1, 1, 0.0), DMatrix::from_element(1, 1, 2.0)).unwrap();
        let z = ConstrainedZonotope::point(DVector::from_vec(vec![1.0]));
        let enc = im_cz_enclosure(&j, &z).unwrap();
        let hull = enc.interval_hull().unwrap();
        assert!(hull[0].lo <= 0.0 + 1e-12 && hull[0].hi >= 2.0 - 1e-12);
    }
}
