//! Float helpers that `core` does not provide without `std`.

pub(crate) use libm::{cos, sin, sqrt};

pub(crate) const TAU: f64 = core::f64::consts::TAU;

/// Euclidean remainder of `x` modulo `2*pi`, in `[0, 2*pi)`.
pub(crate) fn rem_tau(x: f64) -> f64 {
    let r = libm::fmod(x, TAU);
    if r < 0.0 {
        let shifted = r + TAU;
        if shifted >= TAU {
            0.0
        } else {
            shifted
        }
    } else {
        r
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    sqrt(dist_sq(a, b))
}
