#![allow(dead_code)]

use proptest::prelude::*;
use saproj_core::{ConvexSet, Vector};

pub fn vector(dim: usize, range: f64) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-range..range, dim).prop_map(|c| Vector::new(c).unwrap())
}

fn nonzero(dim: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-2.0..2.0f64, dim)
        .prop_filter("nonzero normal", |c| c.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(|c| Vector::new(c).unwrap())
}

/// Any set of ambient dimension `dim`.
pub fn convex_set(dim: usize) -> BoxedStrategy<ConvexSet> {
    let mut options: Vec<BoxedStrategy<ConvexSet>> = vec![
        (nonzero(dim), -2.0..2.0f64).prop_map(|(a, b)| ConvexSet::halfspace(a, b).unwrap()).boxed(),
        (nonzero(dim), -2.0..2.0f64).prop_map(|(a, b)| ConvexSet::hyperplane(a, b).unwrap()).boxed(),
        (vector(dim, 2.0), 0.0..2.0f64).prop_map(|(c, r)| ConvexSet::ball(c, r).unwrap()).boxed(),
        (prop::collection::vec((-2.0..2.0f64, 0.0..2.0f64), dim))
            .prop_map(|b| {
                let lo: Vec<f64> = b.iter().map(|p| p.0).collect();
                let hi: Vec<f64> = b.iter().map(|p| p.0 + p.1).collect();
                ConvexSet::box_set(Vector::new(lo).unwrap(), Vector::new(hi).unwrap()).unwrap()
            })
            .boxed(),
    ];
    if dim == 2 {
        options.push((-7.0..7.0f64).prop_map(|t| ConvexSet::ray2d(t).unwrap()).boxed());
        options.push(
            prop::array::uniform3(prop::array::uniform2(-2.0..2.0f64))
                .prop_map(|[a, b, c]| ConvexSet::triangle2d(a, b, c).unwrap())
                .boxed(),
        );
    }
    prop::strategy::Union::new(options).boxed()
}

pub fn sub(a: &Vector, b: &Vector) -> Vec<f64> {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x - y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
