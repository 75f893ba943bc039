//! Points in `R^n`, the closed convex sets the library can project onto, and
//! indexed families of such sets.

mod family;
mod set;
mod vector;

pub use family::{Family, FamilyKind, FnGenerator, SetGenerator, SetHandle};
pub use set::{membership_tolerance, ConvexSet, Shape};
pub use vector::{axpy, norm, sub, Vector};

pub(crate) fn vector_dims(expected: usize, x: &Vector) -> crate::Result<()> {
    vector::check_dims(expected, x.dim())
}
