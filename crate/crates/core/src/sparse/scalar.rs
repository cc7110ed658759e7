//! Scalar and vector abstractions shared by the Krylov solvers.
//!
//! Inner products are conjugate-linear in the first argument:
//! `dot(x, y) = sum conj(x_i) * y_i`.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64 as C64;

/// Field of scalars a Krylov space is defined over (`f64` or `Complex64`).
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn real(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn real(self) -> f64 {
        self
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn real(self) -> f64 {
        self.re
    }
}

/// Element of an inner-product space over [`KrylovVector::Scalar`].
pub trait KrylovVector: Clone {
    type Scalar: Scalar;

    /// Conjugate-linear in `self`.
    fn dot(&self, other: &Self) -> Self::Scalar;

    fn norm(&self) -> f64 {
        self.dot(self).real().max(0.0).sqrt()
    }

    /// `self += alpha * x`
    fn axpy(&mut self, alpha: Self::Scalar, x: &Self);

    fn scale(&mut self, alpha: Self::Scalar);

    fn zeros_like(&self) -> Self;
}

impl KrylovVector for Vec<f64> {
    type Scalar = f64;

    fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    fn norm(&self) -> f64 {
        norm2_real(self)
    }

    fn axpy(&mut self, alpha: f64, x: &Self) {
        for (y, xi) in self.iter_mut().zip(x) {
            *y += alpha * xi;
        }
    }

    fn scale(&mut self, alpha: f64) {
        self.iter_mut().for_each(|y| *y *= alpha);
    }

    fn zeros_like(&self) -> Self {
        vec![0.0; self.len()]
    }
}

impl KrylovVector for Vec<C64> {
    type Scalar = C64;

    fn dot(&self, other: &Self) -> C64 {
        cdot(self, other)
    }

    fn norm(&self) -> f64 {
        norm2(self)
    }

    fn axpy(&mut self, alpha: C64, x: &Self) {
        for (y, xi) in self.iter_mut().zip(x) {
            *y += alpha * xi;
        }
    }

    fn scale(&mut self, alpha: C64) {
        self.iter_mut().for_each(|y| *y *= alpha);
    }

    fn zeros_like(&self) -> Self {
        vec![C64::new(0.0, 0.0); self.len()]
    }
}

/// `sum conj(a_i) b_i`
pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm2_real(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
