//! Index vectors and the composite string operators `P[iota]` and
//! `P^eps[iota]`.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{Family, Vector};
use crate::math;
use crate::{Error, Result};

/// A nonempty finite sequence of positive set indices `(i_1, ..., i_m)`.
///
/// The derived ordering is lexicographic on the entries, which is the
/// canonical order used when averaging string end-points.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexVector(Vec<usize>);

impl IndexVector {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidIndexVector("index vector must be nonempty"));
        }
        if indices.contains(&0) {
            return Err(Error::InvalidIndexVector("indices start at 1"));
        }
        Ok(IndexVector(indices))
    }

    pub fn from_slice(indices: &[usize]) -> Result<Self> {
        Self::new(indices.to_vec())
    }

    /// The one-element index vector `(i)`.
    pub fn single(i: usize) -> Result<Self> {
        Self::new(alloc::vec![i])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; present for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// The set of distinct entries.
    pub fn index_set(&self) -> BTreeSet<usize> {
        self.0.iter().copied().collect()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn position(&self, i: usize) -> Position {
        match self.0.iter().position(|&j| j == i) {
            Some(p) => Position::At(p + 1),
            None => Position::Infinite,
        }
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &IndexVector) -> IndexVector {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        IndexVector(v)
    }
}

impl fmt::Display for IndexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (n, i) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str(")")
    }
}

/// First 1-based location of an index in an index vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Position {
    At(usize),
    /// The index does not occur.
    Infinite,
}

impl Position {
    /// `weight / position`, with the convention `weight / infinity = 0`.
    pub fn divide(self, weight: f64) -> f64 {
        match self {
            Position::At(p) => weight / p as f64,
            Position::Infinite => 0.0,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Position::At(_))
    }
}

pub fn position(i: usize, iota: &IndexVector) -> Position {
    iota.position(i)
}

pub fn contains_index(iota: &IndexVector, i: usize) -> bool {
    iota.contains(i)
}

/// `P[iota](x) = P_{i_m}(...P_{i_1}(x)...)`.
pub fn apply_string(family: &Family, iota: &IndexVector, x: &Vector) -> Result<Vector> {
    crate::geometry::vector_dims(family.dim(), x)?;
    let out = string_endpoint(family, iota.indices(), x.as_slice(), None)?;
    Ok(Vector::from_raw(out))
}

/// `P^eps[iota](x)`: each step projects only when the current point is at
/// distance at least `eps` from the set.
pub fn apply_string_eps(family: &Family, iota: &IndexVector, x: &Vector, eps: f64) -> Result<Vector> {
    check_eps(eps)?;
    crate::geometry::vector_dims(family.dim(), x)?;
    let out = string_endpoint(family, iota.indices(), x.as_slice(), Some(eps))?;
    Ok(Vector::from_raw(out))
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(eps))
    }
}

/// Evaluates a string left to right. Sets equal to `R^n` are skipped since
/// their projection is the identity.
pub(crate) fn string_endpoint(family: &Family, indices: &[usize], x: &[f64], eps: Option<f64>) -> Result<Vec<f64>> {
    let trivial_from = family.trivial_from();
    let mut cur = x.to_vec();
    let mut next = Vec::with_capacity(x.len());
    for &i in indices {
        if i == 0 {
            return Err(Error::UnresolvableIndex(0));
        }
        if trivial_from.is_some_and(|t| i >= t) {
            continue;
        }
        let set = family.get(i)?;
        if set.is_whole_space() {
            continue;
        }
        set.project_into(&cur, &mut next);
        match eps {
            Some(eps) if math::dist(&cur, &next) < eps => {}
            _ => core::mem::swap(&mut cur, &mut next),
        }
    }
    Ok(cur)
}
