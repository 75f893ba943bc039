//! Ready-made families of convex sets: linear systems, descending chains of
//! balls, a family of shrinking triangles, and a family of rays through the
//! origin on which string-averaging fails to converge.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::geometry::{ConvexSet, Family, SetGenerator, Vector};
use crate::math;
use crate::strings::IndexVector;
use crate::weights::{WeightFunction, WeightSchedule};
use crate::{Error, Result};

/// One hyperplane `{x : a_i . x = b_i}` per row of `a`.
pub fn family_linear_system(a: &[Vec<f64>], b: &[f64]) -> Result<Family> {
    if a.is_empty() {
        return Err(Error::InvalidFamily("linear system has no equations".into()));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let n = a[0].len();
    let mut sets = Vec::with_capacity(a.len());
    for (row, (ai, bi)) in a.iter().zip(b).enumerate() {
        if ai.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: ai.len() });
        }
        if ai.iter().all(|c| *c == 0.0) {
            return Err(Error::InvalidFamily(format!("row {} of the matrix is zero", row + 1)));
        }
        sets.push(ConvexSet::hyperplane(Vector::from_slice(ai)?, *bi)?);
    }
    Family::finite(n, sets)
}

/// Concentric balls `B(center, r_i)` with `r_i` nonincreasing.
pub struct DescendingChain<F> {
    center: Vector,
    radius: F,
}

impl<F> DescendingChain<F>
where
    F: Fn(usize) -> f64 + Send + Sync,
{
    pub fn new(center: Vector, radius: F) -> Self {
        DescendingChain { center, radius }
    }
}

impl<F> SetGenerator for DescendingChain<F>
where
    F: Fn(usize) -> f64 + Send + Sync,
{
    fn generate(&self, i: usize) -> Result<ConvexSet> {
        let r = (self.radius)(i);
        if i > 1 {
            let prev = (self.radius)(i - 1);
            if r > prev {
                return Err(Error::InvalidFamily(format!("radius increases from {prev} to {r} at index {i}")));
            }
        }
        ConvexSet::ball(self.center.clone(), r)
    }

    fn describe(&self) -> String {
        format!("descending_chain(center={:?})", self.center.as_slice())
    }
}

impl<F> fmt::Debug for DescendingChain<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DescendingChain").field("center", &self.center).finish()
    }
}

/// Infinite chain of balls centred at the origin of `R^n`.
pub fn family_descending_chain<F>(n: usize, radius: F) -> Result<Family>
where
    F: Fn(usize) -> f64 + Send + Sync + 'static,
{
    family_descending_chain_at(Vector::zeros(n), radius)
}

pub fn family_descending_chain_at<F>(center: Vector, radius: F) -> Result<Family>
where
    F: Fn(usize) -> f64 + Send + Sync + 'static,
{
    let n = center.dim();
    Family::infinite(n, Vec::new(), Arc::new(DescendingChain::new(center, radius)))
}

/// Triangle `C_i` with vertices `(-1,0)`, `(1,0)` and
/// `(cos(pi/2^i), sin(pi/2^i))`.
pub fn triangle(i: usize) -> Result<ConvexSet> {
    let angle = PI / libm::pow(2.0, i as f64);
    ConvexSet::triangle2d([-1.0, 0.0], [1.0, 0.0], [math::cos(angle), math::sin(angle)])
}

struct Triangles;

impl SetGenerator for Triangles {
    fn generate(&self, i: usize) -> Result<ConvexSet> {
        triangle(i)
    }

    fn describe(&self) -> String {
        "triangles".into()
    }
}

/// The triangles of [`triangle`] for `i = 1, 2, ...`. Their intersection is
/// the segment from `(-1,0)` to `(1,0)`.
pub fn family_triangles() -> Family {
    Family::infinite(2, Vec::new(), Arc::new(Triangles)).expect("planar generator")
}

/// Infinite planar family from an arbitrary triangle generator.
pub fn family_triangles_with<F>(f: F) -> Family
where
    F: Fn(usize) -> Result<ConvexSet> + Send + Sync + 'static,
{
    Family::infinite(2, Vec::new(), Arc::new(crate::geometry::FnGenerator::new("triangles", f)))
        .expect("planar generator")
}

/// Finite prefix of the angle sequence behind the rays counterexample.
///
/// The sequence is the nondecreasing merge of the harmonic partial sums
/// `phi_i = 1 + 1/2 + ... + 1/i` (`phi_0 = 0`) with the extra values
/// `(phi_j mod 2pi) + (2j+1) 2^k pi` for `j >= 0`, `k >= 1`. Each extra value
/// repeats the direction of `phi_j`, so every direction recurs.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaSequence {
    values: Vec<f64>,
    inserted: Vec<bool>,
    ceiling: f64,
}

impl ThetaSequence {
    /// `theta_i` for `i` within the prefix.
    pub fn get(&self, i: usize) -> Option<f64> {
        self.values.get(i).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Whether `theta_i` is one of the inserted values.
    pub fn is_inserted(&self, i: usize) -> bool {
        self.inserted.get(i).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest harmonic partial sum used when building the prefix; every
    /// inserted value up to it is present.
    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }

    /// `max_i |theta_{i+1} - theta_i| * max(i, 1)` over the prefix.
    pub fn gap_constant(&self) -> f64 {
        self.values.windows(2).enumerate().map(|(i, w)| libm::fabs(w[1] - w[0]) * i.max(1) as f64).fold(0.0, f64::max)
    }
}

/// First `prefix_len` terms of the [`ThetaSequence`].
pub fn theta_sequence(prefix_len: usize) -> Result<ThetaSequence> {
    if prefix_len == 0 {
        return Err(Error::InvalidParameter("theta prefix length must be at least 1".into()));
    }
    // phi_0..phi_M with M = prefix_len already supplies enough terms.
    let m = prefix_len;
    let mut phi = Vec::with_capacity(m + 1);
    let mut acc = 0.0;
    phi.push(acc);
    for j in 1..=m {
        acc += 1.0 / j as f64;
        phi.push(acc);
    }
    let ceiling = acc;

    let mut merged: Vec<(f64, bool)> = phi.iter().map(|&p| (p, false)).collect();
    let mut j = 0usize;
    while j < phi.len() && ((2 * j + 1) as f64) * 2.0 * PI <= ceiling {
        let base = math::rem_tau(phi[j]);
        let mut k = 1u32;
        loop {
            let value = base + ((2 * j + 1) as f64) * libm::pow(2.0, k as f64) * PI;
            if value > ceiling {
                break;
            }
            merged.push((value, true));
            k += 1;
        }
        j += 1;
    }
    // Stable: on ties the harmonic value stays ahead of the inserted one.
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    merged.truncate(prefix_len);
    Ok(ThetaSequence {
        values: merged.iter().map(|e| e.0).collect(),
        inserted: merged.iter().map(|e| e.1).collect(),
        ceiling,
    })
}

/// Tolerance for treating two angles as the same direction.
fn same_direction_tolerance(theta: f64) -> f64 {
    1e-15 * (1.0 + libm::fabs(theta))
}

/// Groups `theta_1..theta_{L-1}` by direction. Returns `alpha` with
/// `alpha[i - 1]` the family index of ray `R_i`, and the angle of each
/// family member in order.
fn deduplicate(theta: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let rays = &theta[1..];
    let angles: Vec<f64> = rays.iter().map(|&t| math::rem_tau(t)).collect();
    let mut order: Vec<usize> = (0..rays.len()).collect();
    order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]).then(a.cmp(&b)));

    // Union adjacent angles (including across 2pi) within tolerance; each
    // group is represented by its earliest ray.
    let mut group_of = alloc::vec![0usize; rays.len()];
    let mut groups: Vec<usize> = Vec::new();
    for (pos, &r) in order.iter().enumerate() {
        let joins = pos > 0 && {
            let prev = order[pos - 1];
            angles[r] - angles[prev] <= same_direction_tolerance(rays[r]).max(same_direction_tolerance(rays[prev]))
        };
        if joins {
            let g = group_of[order[pos - 1]];
            group_of[r] = g;
            groups[g] = groups[g].min(r);
        } else {
            group_of[r] = groups.len();
            groups.push(r);
        }
    }
    if groups.len() > 1 {
        let first = order[0];
        let last = order[order.len() - 1];
        let gap = angles[first] + math::TAU - angles[last];
        if gap <= same_direction_tolerance(rays[first]).max(same_direction_tolerance(rays[last])) {
            let (keep, drop) = (group_of[first], group_of[last]);
            if keep != drop {
                groups[keep] = groups[keep].min(groups[drop]);
                for g in group_of.iter_mut() {
                    if *g == drop {
                        *g = keep;
                    }
                }
            }
        }
    }

    // Number family members by first occurrence.
    let mut family_index = alloc::vec![0usize; groups.len()];
    let mut directions = Vec::new();
    let mut alpha = Vec::with_capacity(rays.len());
    for (r, &g) in group_of.iter().enumerate() {
        if family_index[g] == 0 {
            directions.push(rays[groups[g]]);
            family_index[g] = directions.len();
        }
        alpha.push(family_index[g]);
        debug_assert!(groups[g] <= r);
    }
    (alpha, directions)
}

/// `w^k = {(alpha(k+1)): 1}` for `k` within the generated prefix.
#[derive(Clone, Debug)]
pub struct RaySchedule {
    alpha: Arc<Vec<usize>>,
}

impl RaySchedule {
    /// Number of iterations the schedule covers.
    pub fn horizon(&self) -> u64 {
        self.alpha.len() as u64
    }
}

impl WeightSchedule for RaySchedule {
    fn weights(&self, k: u64) -> Result<WeightFunction> {
        let Some(&i) = self.alpha.get(k as usize) else {
            return Err(Error::InvalidSchedule(format!(
                "ray schedule covers {} iterations; iteration {k} is past its end",
                self.alpha.len()
            )));
        };
        Ok(WeightFunction::single(IndexVector::single(i)?))
    }

    fn describe(&self) -> String {
        format!("ray_schedule({} iterations)", self.alpha.len())
    }
}

struct PrefixEnd {
    len: usize,
}

impl SetGenerator for PrefixEnd {
    fn generate(&self, i: usize) -> Result<ConvexSet> {
        Err(Error::UnresolvableIndex(self.len + i))
    }

    fn describe(&self) -> String {
        "rays".into()
    }
}

/// The rays counterexample on a finite prefix.
#[derive(Clone, Debug)]
pub struct RaysCounterexample {
    pub theta: ThetaSequence,
    /// `alpha[i - 1] = alpha(i)`: ray `R_i` is family member `C_{alpha(i)}`.
    pub alpha: Vec<usize>,
    /// Rays `C_1, C_2, ...` in order of first occurrence. The family is
    /// infinite; indices past the generated prefix cannot be resolved.
    pub family: Family,
    pub schedule: RaySchedule,
    /// `(cos theta_0, sin theta_0)`.
    pub x0: Vector,
}

impl RaysCounterexample {
    /// `alpha(i)` for `1 <= i < prefix_len`.
    pub fn alpha(&self, i: usize) -> Option<usize> {
        i.checked_sub(1).and_then(|j| self.alpha.get(j)).copied()
    }

    /// Number of distinct rays.
    pub fn ray_count(&self) -> usize {
        self.family.head_len()
    }

    /// `prod_{i<k} cos(theta_{i+1} - theta_i)`, the predicted `||x^k||`.
    pub fn norm_product(&self, k: usize) -> f64 {
        self.theta.values()[..=k].windows(2).map(|w| math::cos(w[1] - w[0])).product()
    }
}

/// Rays through the origin at the angles of [`theta_sequence`], deduplicated
/// by direction, with the schedule that projects onto `R_{k+1}` at step `k`.
pub fn family_rays_counterexample(prefix_len: usize) -> Result<RaysCounterexample> {
    if prefix_len < 2 {
        return Err(Error::InvalidParameter("rays counterexample needs a prefix of at least 2 angles".into()));
    }
    let theta = theta_sequence(prefix_len)?;
    let (alpha, directions) = deduplicate(theta.values());
    let rays = directions.iter().map(|&t| ConvexSet::ray2d(t)).collect::<Result<Vec<_>>>()?;
    let len = rays.len();
    let family = Family::infinite(2, rays, Arc::new(PrefixEnd { len }))?;
    let t0 = theta.values()[0];
    let x0 = Vector::new(alloc::vec![math::cos(t0), math::sin(t0)])?;
    let alpha_shared = Arc::new(alpha.clone());
    Ok(RaysCounterexample { theta, alpha, family, schedule: RaySchedule { alpha: alpha_shared }, x0 })
}
