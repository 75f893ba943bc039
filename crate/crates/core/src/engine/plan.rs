//! Perturbation plans: additive perturbations `v^k` and superiorization
//! steering `(beta_k, u^k)`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Vector;
use crate::math;
use crate::weights::derive_seed;
use crate::{Error, Result};

/// A rule `k -> v^k` with a declared bound `B >= sum_k ||v^k||`.
pub trait Perturbation: Send + Sync {
    fn vector(&self, k: u64, dim: usize) -> Vector;

    /// Declared bound on the sum of perturbation norms.
    fn bound(&self) -> f64;

    fn describe(&self) -> String;
}

/// A steering rule `k -> (beta_k, u^k)` for superiorized runs.
pub trait Superiorizer: Send + Sync {
    fn step_size(&self, k: u64) -> f64;

    /// `u^k`, which may depend on the point being steered.
    fn direction(&self, k: u64, x: &Vector) -> Vector;

    /// Declared bound on `sum_k |beta_k|`.
    fn step_bound(&self) -> f64;

    /// Declared bound `U >= ||u^k||`.
    fn direction_bound(&self) -> f64;

    fn describe(&self) -> String;
}

/// What, if anything, is added to the unperturbed iteration.
#[derive(Clone, Default)]
pub enum PerturbationPlan {
    #[default]
    None,
    Additive(Arc<dyn Perturbation>),
    Steering(Arc<dyn Superiorizer>),
}

impl PerturbationPlan {
    pub fn additive(p: impl Perturbation + 'static) -> Self {
        PerturbationPlan::Additive(Arc::new(p))
    }

    pub fn steering(s: impl Superiorizer + 'static) -> Self {
        PerturbationPlan::Steering(Arc::new(s))
    }

    pub fn describe(&self) -> String {
        match self {
            PerturbationPlan::None => "none".into(),
            PerturbationPlan::Additive(p) => p.describe(),
            PerturbationPlan::Steering(s) => s.describe(),
        }
    }
}

impl fmt::Debug for PerturbationPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Uniformly distributed unit vector, drawn by rejection from the cube.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let sq = math::norm_sq(&v);
        if sq > 1e-12 && sq <= 1.0 {
            let n = math::sqrt(sq);
            return Vector::from_raw(v.into_iter().map(|c| c / n).collect());
        }
    }
}

fn geometric_terms(scale: f64, ratio: f64) -> Result<f64> {
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::InvalidParameter(format!("scale must be finite and nonnegative, got {scale}")));
    }
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidParameter(format!("ratio must lie in [0, 1), got {ratio}")));
    }
    Ok(scale / (1.0 - ratio))
}

/// `v^k = scale * ratio^k * u_k` with `u_k` a seeded random unit vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricPerturbation {
    scale: f64,
    ratio: f64,
    seed: u64,
    bound: f64,
}

impl GeometricPerturbation {
    pub fn new(scale: f64, ratio: f64, seed: u64) -> Result<Self> {
        let bound = geometric_terms(scale, ratio)?;
        Ok(GeometricPerturbation { scale, ratio, seed, bound })
    }

    pub fn magnitude(&self, k: u64) -> f64 {
        self.scale * libm::pow(self.ratio, k as f64)
    }
}

impl Perturbation for GeometricPerturbation {
    fn vector(&self, k: u64, dim: usize) -> Vector {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, k));
        random_unit_vector(&mut rng, dim).scaled(self.magnitude(k))
    }

    fn bound(&self) -> f64 {
        self.bound
    }

    fn describe(&self) -> String {
        format!("geometric(scale={}, ratio={}, seed={})", self.scale, self.ratio, self.seed)
    }
}

/// Perturbation given by a closure and a declared bound.
pub struct FnPerturbation<F> {
    f: F,
    bound: f64,
    label: String,
}

impl<F> FnPerturbation<F>
where
    F: Fn(u64, usize) -> Vector + Send + Sync,
{
    pub fn new(label: impl Into<String>, bound: f64, f: F) -> Self {
        FnPerturbation { f, bound, label: label.into() }
    }
}

impl<F> Perturbation for FnPerturbation<F>
where
    F: Fn(u64, usize) -> Vector + Send + Sync,
{
    fn vector(&self, k: u64, dim: usize) -> Vector {
        (self.f)(k, dim)
    }

    fn bound(&self) -> f64 {
        self.bound
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

impl<F> fmt::Debug for FnPerturbation<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPerturbation").field("label", &self.label).field("bound", &self.bound).finish()
    }
}

/// Where a [`GeometricSuperiorizer`] steers.
#[derive(Clone, Debug, PartialEq)]
pub enum SteeringTarget {
    /// Toward the given point.
    Point(Vector),
    /// Toward the origin, reducing the norm.
    MinNorm,
}

/// `beta_k = scale * ratio^k` with `u^k` the unit vector from the current
/// point toward the target (zero at the target).
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricSuperiorizer {
    scale: f64,
    ratio: f64,
    target: SteeringTarget,
    bound: f64,
}

impl GeometricSuperiorizer {
    pub fn new(scale: f64, ratio: f64, target: SteeringTarget) -> Result<Self> {
        let bound = geometric_terms(scale, ratio)?;
        Ok(GeometricSuperiorizer { scale, ratio, target, bound })
    }
}

impl Superiorizer for GeometricSuperiorizer {
    fn step_size(&self, k: u64) -> f64 {
        self.scale * libm::pow(self.ratio, k as f64)
    }

    fn direction(&self, _k: u64, x: &Vector) -> Vector {
        let toward: Vec<f64> = match &self.target {
            SteeringTarget::Point(p) => p.as_slice().iter().zip(x.as_slice()).map(|(p, x)| p - x).collect(),
            SteeringTarget::MinNorm => x.as_slice().iter().map(|c| -c).collect(),
        };
        let n = math::sqrt(math::norm_sq(&toward));
        if n > 0.0 {
            Vector::from_raw(toward.into_iter().map(|c| c / n).collect())
        } else {
            Vector::zeros(x.dim())
        }
    }

    fn step_bound(&self) -> f64 {
        self.bound
    }

    fn direction_bound(&self) -> f64 {
        1.0
    }

    fn describe(&self) -> String {
        format!("steer(scale={}, ratio={}, target={:?})", self.scale, self.ratio, self.target)
    }
}

/// Superiorizer given by closures for `beta_k` and `u^k`.
pub struct FnSuperiorizer<B, U> {
    beta: B,
    u: U,
    step_bound: f64,
    direction_bound: f64,
    label: String,
}

impl<B, U> FnSuperiorizer<B, U>
where
    B: Fn(u64) -> f64 + Send + Sync,
    U: Fn(u64, &Vector) -> Vector + Send + Sync,
{
    pub fn new(label: impl Into<String>, step_bound: f64, direction_bound: f64, beta: B, u: U) -> Self {
        FnSuperiorizer { beta, u, step_bound, direction_bound, label: label.into() }
    }
}

impl<B, U> Superiorizer for FnSuperiorizer<B, U>
where
    B: Fn(u64) -> f64 + Send + Sync,
    U: Fn(u64, &Vector) -> Vector + Send + Sync,
{
    fn step_size(&self, k: u64) -> f64 {
        (self.beta)(k)
    }

    fn direction(&self, k: u64, x: &Vector) -> Vector {
        (self.u)(k, x)
    }

    fn step_bound(&self) -> f64 {
        self.step_bound
    }

    fn direction_bound(&self) -> f64 {
        self.direction_bound
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

impl<B, U> fmt::Debug for FnSuperiorizer<B, U> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSuperiorizer").field("label", &self.label).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_perturbation_is_seeded_and_bounded() {
        let p = GeometricPerturbation::new(1.0, 0.5, 42).unwrap();
        assert_eq!(p.bound(), 2.0);
        let total: f64 = (0..200).map(|k| p.vector(k, 3).norm()).sum();
        assert!(total <= p.bound() + 1e-12);
        assert!((p.vector(0, 3).norm() - 1.0).abs() < 1e-15);
        assert_eq!(p.vector(7, 3), GeometricPerturbation::new(1.0, 0.5, 42).unwrap().vector(7, 3));
        assert_ne!(p.vector(7, 3), GeometricPerturbation::new(1.0, 0.5, 43).unwrap().vector(7, 3));
        assert!(GeometricPerturbation::new(1.0, 1.0, 0).is_err());
        assert!(GeometricPerturbation::new(-1.0, 0.5, 0).is_err());
    }

    #[test]
    fn steering_direction_is_unit_or_zero() {
        let s = GeometricSuperiorizer::new(0.5, 0.9, SteeringTarget::MinNorm).unwrap();
        let u = s.direction(0, &Vector::from_slice(&[3.0, 4.0]).unwrap());
        assert_eq!(u.as_slice(), &[-0.6, -0.8]);
        assert_eq!(s.direction(0, &Vector::zeros(2)), Vector::zeros(2));
        assert!((s.step_bound() - 5.0).abs() < 1e-12);
    }
}
