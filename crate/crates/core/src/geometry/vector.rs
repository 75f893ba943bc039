use alloc::vec::Vec;
use core::ops::Index;

use crate::math;
use crate::{Error, Result};

/// A point in `R^n` with finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Wraps `coords`, rejecting empty input and non-finite entries.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("vector must have at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Vector(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(alloc::vec![0.0; dim.max(1)])
    }

    /// Internal constructor for arithmetic results; callers that may produce
    /// non-finite values check [`Vector::is_finite`] themselves.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Vector(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(math::norm_sq(&self.0))
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(math::dot(&self.0, &other.0))
    }

    /// `||self - other||`.
    pub fn distance_to(&self, other: &Vector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(math::dist(&self.0, &other.0))
    }

    pub fn scaled(&self, alpha: f64) -> Vector {
        Vector(self.0.iter().map(|c| alpha * c).collect())
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Euclidean norm.
pub fn norm(x: &Vector) -> f64 {
    x.norm()
}

/// `x - y`.
pub fn sub(x: &Vector, y: &Vector) -> Result<Vector> {
    check_dims(x.dim(), y.dim())?;
    Ok(Vector(x.0.iter().zip(&y.0).map(|(a, b)| a - b).collect()))
}

/// `alpha * x + y`.
pub fn axpy(alpha: f64, x: &Vector, y: &Vector) -> Result<Vector> {
    check_dims(x.dim(), y.dim())?;
    Ok(Vector(x.0.iter().zip(&y.0).map(|(a, b)| alpha * a + b).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn basic_arithmetic() {
        let x = Vector::new(vec![3.0, 4.0]).unwrap();
        let y = Vector::new(vec![-1.0, 2.5]).unwrap();
        assert_eq!(norm(&x), 5.0);
        assert_eq!(sub(&x, &x).unwrap(), Vector::zeros(2));
        assert_eq!(axpy(0.0, &x, &y).unwrap(), y);
        assert_eq!(axpy(2.0, &x, &y).unwrap().as_slice(), &[5.0, 10.5]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Vector::new(vec![]).is_err());
        assert_eq!(Vector::new(vec![f64::NAN]), Err(Error::NonFinite("vector")));
        let x = Vector::zeros(2);
        let y = Vector::zeros(3);
        assert_eq!(sub(&x, &y), Err(Error::DimensionMismatch { expected: 2, found: 3 }));
        assert!(axpy(1.0, &x, &y).is_err());
    }
}
