use alloc::vec::Vec;

use super::vector::check_dims;
use super::Vector;
use crate::math;
use crate::{Error, Result};

/// Parameters of one of the supported closed convex sets.
///
/// A `Shape` is plain data; it becomes usable through [`ConvexSet::new`],
/// which validates it once so that projection never fails for a
/// well-formed set.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// `{x : normal . x <= offset}`.
    Halfspace { normal: Vector, offset: f64 },
    /// `{x : normal . x = offset}`.
    Hyperplane { normal: Vector, offset: f64 },
    Ball { center: Vector, radius: f64 },
    /// Axis-aligned box `lo <= x <= hi`.
    Box { lo: Vector, hi: Vector },
    /// Closed ray in `R^2` from the origin through `(cos theta, sin theta)`.
    Ray2D { theta: f64 },
    /// Closed (possibly degenerate) triangle in `R^2`.
    Triangle2D { vertices: [[f64; 2]; 3] },
    /// All of `R^n`; projection is the identity.
    WholeSpace,
}

#[derive(Clone, Debug, PartialEq)]
enum Aux {
    None,
    NormalSq(f64),
    Direction([f64; 2]),
    /// Twice the signed area.
    Area2(f64),
}

/// A validated nonempty closed convex set with an exact Euclidean projection.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexSet {
    shape: Shape,
    aux: Aux,
}

/// Scale-relative tolerance used by [`ConvexSet::contains`].
pub fn membership_tolerance(x: &Vector) -> f64 {
    1e-12 * (1.0 + x.norm())
}

impl ConvexSet {
    pub fn new(shape: Shape) -> Result<Self> {
        let aux = match &shape {
            Shape::Halfspace { normal, offset } | Shape::Hyperplane { normal, offset } => {
                if !offset.is_finite() {
                    return Err(Error::NonFinite("set offset"));
                }
                let nsq = math::norm_sq(normal.as_slice());
                if nsq == 0.0 {
                    return Err(Error::InvalidSet("normal vector must be nonzero"));
                }
                if !nsq.is_finite() {
                    return Err(Error::InvalidSet("normal vector is too large"));
                }
                Aux::NormalSq(nsq)
            }
            Shape::Ball { radius, .. } => {
                if !radius.is_finite() {
                    return Err(Error::NonFinite("ball radius"));
                }
                if *radius < 0.0 {
                    return Err(Error::InvalidSet("ball radius must be nonnegative"));
                }
                Aux::None
            }
            Shape::Box { lo, hi } => {
                check_dims(lo.dim(), hi.dim())?;
                if lo.as_slice().iter().zip(hi.as_slice()).any(|(l, h)| l > h) {
                    return Err(Error::InvalidSet("box requires lo <= hi componentwise"));
                }
                Aux::None
            }
            Shape::Ray2D { theta } => {
                if !theta.is_finite() {
                    return Err(Error::NonFinite("ray angle"));
                }
                Aux::Direction([math::cos(*theta), math::sin(*theta)])
            }
            Shape::Triangle2D { vertices } => {
                if vertices.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite("triangle vertex"));
                }
                let [a, b, c] = *vertices;
                Aux::Area2(cross(sub2(b, a), sub2(c, a)))
            }
            Shape::WholeSpace => Aux::None,
        };
        Ok(ConvexSet { shape, aux })
    }

    pub fn halfspace(normal: Vector, offset: f64) -> Result<Self> {
        Self::new(Shape::Halfspace { normal, offset })
    }

    pub fn hyperplane(normal: Vector, offset: f64) -> Result<Self> {
        Self::new(Shape::Hyperplane { normal, offset })
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        Self::new(Shape::Ball { center, radius })
    }

    pub fn box_set(lo: Vector, hi: Vector) -> Result<Self> {
        Self::new(Shape::Box { lo, hi })
    }

    pub fn ray2d(theta: f64) -> Result<Self> {
        Self::new(Shape::Ray2D { theta })
    }

    pub fn triangle2d(v1: [f64; 2], v2: [f64; 2], v3: [f64; 2]) -> Result<Self> {
        Self::new(Shape::Triangle2D { vertices: [v1, v2, v3] })
    }

    pub fn whole_space() -> Self {
        ConvexSet { shape: Shape::WholeSpace, aux: Aux::None }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self.shape, Shape::WholeSpace)
    }

    /// Dimension of the ambient space, or `None` for [`Shape::WholeSpace`],
    /// which fits any dimension.
    pub fn ambient_dim(&self) -> Option<usize> {
        match &self.shape {
            Shape::Halfspace { normal, .. } | Shape::Hyperplane { normal, .. } => Some(normal.dim()),
            Shape::Ball { center, .. } => Some(center.dim()),
            Shape::Box { lo, .. } => Some(lo.dim()),
            Shape::Ray2D { .. } | Shape::Triangle2D { .. } => Some(2),
            Shape::WholeSpace => None,
        }
    }

    fn check_point(&self, x: &Vector) -> Result<()> {
        match self.ambient_dim() {
            Some(n) => check_dims(n, x.dim()),
            None => Ok(()),
        }
    }

    /// The nearest point of the set to `x`.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        self.check_point(x)?;
        let mut out = Vec::with_capacity(x.dim());
        self.project_into(x.as_slice(), &mut out);
        Ok(Vector::from_raw(out))
    }

    /// `||x - project(x)||`.
    pub fn distance(&self, x: &Vector) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.distance_slice(x.as_slice()))
    }

    /// Membership up to [`membership_tolerance`].
    pub fn contains(&self, x: &Vector) -> Result<bool> {
        Ok(self.distance(x)? <= membership_tolerance(x))
    }

    pub(crate) fn distance_slice(&self, x: &[f64]) -> f64 {
        if self.is_whole_space() {
            return 0.0;
        }
        let mut p = Vec::with_capacity(x.len());
        self.project_into(x, &mut p);
        math::dist(x, &p)
    }

    /// Writes the projection of `x` into `out` (cleared first). The caller
    /// guarantees the dimension matches.
    pub(crate) fn project_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match (&self.shape, &self.aux) {
            (Shape::WholeSpace, _) => out.extend_from_slice(x),
            (Shape::Halfspace { normal, offset }, Aux::NormalSq(nsq)) => {
                let r = math::dot(normal.as_slice(), x) - offset;
                if r <= 0.0 {
                    out.extend_from_slice(x);
                } else {
                    let s = r / nsq;
                    out.extend(x.iter().zip(normal.as_slice()).map(|(xi, ai)| xi - s * ai));
                }
            }
            (Shape::Hyperplane { normal, offset }, Aux::NormalSq(nsq)) => {
                let s = (math::dot(normal.as_slice(), x) - offset) / nsq;
                out.extend(x.iter().zip(normal.as_slice()).map(|(xi, ai)| xi - s * ai));
            }
            (Shape::Ball { center, radius }, _) => {
                let c = center.as_slice();
                let len = math::dist(x, c);
                if len <= *radius {
                    out.extend_from_slice(x);
                } else {
                    let s = radius / len;
                    out.extend(x.iter().zip(c).map(|(xi, ci)| ci + s * (xi - ci)));
                }
            }
            (Shape::Box { lo, hi }, _) => {
                out.extend(
                    x.iter()
                        .zip(lo.as_slice().iter().zip(hi.as_slice()))
                        .map(|(xi, (l, h))| xi.max(*l).min(*h)),
                );
            }
            (Shape::Ray2D { .. }, Aux::Direction(u)) => {
                let t = x[0] * u[0] + x[1] * u[1];
                if t > 0.0 {
                    out.extend_from_slice(&[t * u[0], t * u[1]]);
                } else {
                    out.extend_from_slice(&[0.0, 0.0]);
                }
            }
            (Shape::Triangle2D { vertices }, Aux::Area2(area2)) => {
                let p = [x[0], x[1]];
                out.extend_from_slice(&project_triangle(vertices, *area2, p));
            }
            _ => unreachable!("auxiliary data always matches the shape"),
        }
    }
}

fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn project_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> [f64; 2] {
    let ab = sub2(b, a);
    let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
    if len_sq == 0.0 {
        return a;
    }
    let ap = sub2(p, a);
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len_sq).clamp(0.0, 1.0);
    [a[0] + t * ab[0], a[1] + t * ab[1]]
}

fn project_triangle(v: &[[f64; 2]; 3], area2: f64, p: [f64; 2]) -> [f64; 2] {
    if area2 != 0.0 {
        let sign = area2.signum();
        let inside = (0..3).all(|i| {
            let a = v[i];
            let b = v[(i + 1) % 3];
            sign * cross(sub2(b, a), sub2(p, a)) >= 0.0
        });
        if inside {
            return p;
        }
    }
    let mut best = v[0];
    let mut best_d = f64::INFINITY;
    let candidates = [
        project_segment(v[0], v[1], p),
        project_segment(v[1], v[2], p),
        project_segment(v[2], v[0], p),
        v[0],
        v[1],
        v[2],
    ];
    for q in candidates {
        let d = (q[0] - p[0]) * (q[0] - p[0]) + (q[1] - p[1]) * (q[1] - p[1]);
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    best
}
