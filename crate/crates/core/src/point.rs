use std::ops::Index;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A point in `R^d`.
///
/// Public constructors reject empty or non-finite input. Arithmetic results
/// are not re-validated, so a diverging trajectory can carry non-finite
/// coordinates; callers check [`Point::is_finite`] where it matters.
#[derive(Clone, Debug, PartialEq)]
pub struct Point<T> {
    coords: Vec<T>,
}

impl<T: Scalar> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyPoint);
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { coords })
    }

    pub fn from_f64(coords: &[f64]) -> Result<Self> {
        Self::new(coords.iter().map(|&c| T::lit(c)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self {
            coords: vec![T::zero(); dim],
        }
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<T>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<T> {
        self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            })
        }
    }

    pub fn dot(&self, other: &Self) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.coords
            .iter()
            .fold(T::zero(), |acc, &c| acc.max(c.abs()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_vec_unchecked(self.coords.iter().map(|&c| f(c)).collect())
    }

    /// Coordinatewise combination of two points of equal dimension.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self::from_vec_unchecked(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, factor: T) -> Self {
        self.map(|c| c * factor)
    }

    /// `self + factor * other`
    pub fn axpy(&self, factor: T, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + factor * b)
    }

    pub fn distance_sq(&self, other: &Self) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum()
    }
}

impl<T> Index<usize> for Point<T> {
    type Output = T;

    fn index(&self, index: usize) -> &T {
        &self.coords[index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert_eq!(
            Point::<f64>::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        );
        assert_eq!(
            Point::<f64>::new(vec![f64::INFINITY]),
            Err(Error::NonFinite { index: 0 })
        );
        assert_eq!(Point::<f64>::new(vec![]), Err(Error::EmptyPoint));
    }

    #[test]
    fn arithmetic() {
        let a = Point::new(vec![1.0, 2.0]).unwrap();
        let b = Point::new(vec![3.0, -1.0]).unwrap();
        assert_eq!(a.dot(&b), 1.0);
        assert_eq!(a.axpy(2.0, &b).as_slice(), &[7.0, 0.0]);
        assert_eq!(a.sub(&b).as_slice(), &[-2.0, 3.0]);
        assert_eq!(a.distance_sq(&b), 13.0);
        assert_eq!(b.max_abs(), 3.0);
        assert!(a.check_dim(3).is_err());
    }

    #[test]
    fn single_precision_works() {
        let a = Point::<f32>::from_f64(&[0.5, 0.25]).unwrap();
        assert_eq!(a.norm_sq(), 0.3125f32);
    }
}
