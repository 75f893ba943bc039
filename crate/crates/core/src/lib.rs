//! String-averaging projection methods for convex feasibility problems.
//!
//! The crate finds points in the intersection of a finite or countably
//! infinite collection of closed convex sets `C_1, C_2, ...` in `R^n`. One
//! iteration runs several *strings* of sequential projections from the current
//! iterate and takes a weighted average of their end-points:
//!
//! ```text
//! x^{k+1} = sum_{iota} w^k(iota) * P[iota](x^k)
//! ```
//!
//! Besides the plain iteration the [`engine`] supports additive perturbations,
//! superiorization steering and epsilon-thresholded projections, plus a staged
//! driver that tightens the threshold while widening the set of targeted
//! indices. The [`analysis`] module checks the sufficient conditions on weight
//! schedules over finite horizons and monitors the descent inequalities the
//! iteration must satisfy.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod analysis;
pub mod engine;
mod error;
pub mod families;
pub mod geometry;
mod math;
pub mod strings;
pub mod weights;

pub use error::{Error, Result};
pub use geometry::{ConvexSet, Family, Shape, Vector};
pub use strings::{IndexVector, Position};
pub use weights::{WeightFunction, WeightSchedule};
