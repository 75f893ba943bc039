//! Acceptance suite. Every test prints one `PASS`/`FAIL criterion N` line to
//! stderr before asserting, so the output of
//! `cargo test -p saproj-cli --test acceptance` reads as a checklist.
//! The lines go straight to the stderr handle, which the test harness does
//! not capture.
#![allow(clippy::explicit_write)]

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saproj_cli::config::{parse_config, ExperimentConfig};
use saproj_cli::demos;
use saproj_cli::experiment::{replay, run_batch, run_experiment, RunOutcome, EXIT_OK};
use saproj_core::analysis::{check_c1, check_c2, check_divergent_sums, Growth, HypothesisId};
use saproj_core::engine::{
    apply_weighted, run, step_eps, step_perturbed, step_superiorized, FnPerturbation, FnSuperiorizer, IterationState,
    Mode, PerturbationPlan, RunOptions, StopRule,
};
use saproj_core::families::family_rays_counterexample;
use saproj_core::weights::{CimminoGrowing, CyclicBlock, CyclicFinite, KaczmarzGrowing, OddEven, Permutation};
use saproj_core::{ConvexSet, Family, IndexVector, Shape, Vector, WeightFunction, WeightSchedule};

fn verdict(criterion: &str, pass: bool, detail: impl std::fmt::Display) {
    let tag = if pass { "PASS" } else { "FAIL" };
    writeln!(std::io::stderr(), "{tag} criterion {criterion}: {detail}").unwrap();
    assert!(pass, "criterion {criterion}: {detail}");
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn vec_of(c: Vec<f64>) -> Vector {
    Vector::new(c).unwrap()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v = uniform(rng, n, -1.0, 1.0);
        let norm = dot(&v, &v).sqrt();
        if norm > 0.1 && norm <= 1.0 {
            return v.iter().map(|c| c / norm).collect();
        }
    }
}

// ---------------------------------------------------------------------------
// Brute-force nearest points: parametrize each set over a box, scan a grid,
// then refine with a bound-constrained compass search.

fn minimize(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    const GRID: usize = 12;
    const STARTS: usize = 4;
    let d = lo.len();
    let mut grid: Vec<(f64, Vec<f64>)> = (0..GRID.pow(d as u32))
        .map(|idx| {
            let mut rem = idx;
            let t: Vec<f64> = (0..d)
                .map(|j| {
                    let g = rem % GRID;
                    rem /= GRID;
                    lo[j] + (hi[j] - lo[j]) * g as f64 / (GRID - 1) as f64
                })
                .collect();
            (f(&t), t)
        })
        .collect();
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    grid.truncate(STARTS);
    grid.into_iter()
        .map(|(v, t)| compass(f, lo, hi, t, v, GRID))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
        .1
}

fn compass(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], mut best: Vec<f64>, mut best_f: f64, grid: usize) -> (f64, Vec<f64>) {
    let d = lo.len();
    let mut step: Vec<f64> = (0..d).map(|j| (hi[j] - lo[j]) / (grid - 1) as f64).collect();
    while (0..d).any(|j| step[j] > 1e-13 * (hi[j] - lo[j]).max(1.0)) {
        let mut improved = false;
        for j in 0..d {
            for sign in [1.0, -1.0] {
                let mut c = best.clone();
                c[j] = (c[j] + sign * step[j]).clamp(lo[j], hi[j]);
                let v = f(&c);
                if v < best_f {
                    best_f = v;
                    best = c;
                    improved = true;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    (best_f, best)
}

/// Orthonormal basis of the complement of the unit vector `a`.
fn complement(a: &[f64]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut basis = vec![a.to_vec()];
    for e in 0..n {
        let mut v = vec![0.0; n];
        v[e] = 1.0;
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 && basis.len() < n {
            basis.push(v.iter().map(|x| x / norm).collect());
        }
    }
    basis.remove(0);
    basis
}

type Param = Box<dyn Fn(&[f64]) -> Vec<f64>>;

/// Maps from a parameter box onto the set, with the box. Angle ranges
/// overlap and radii may be negative so that no optimum sits on an
/// artificial edge of the box.
fn parametrizations(set: &ConvexSet, p: &[f64]) -> Vec<(Param, Vec<f64>, Vec<f64>)> {
    let n = p.len();
    let single: (Param, Vec<f64>, Vec<f64>) = match set.shape().clone() {
        Shape::WholeSpace => unreachable!(),
        Shape::Halfspace { normal, offset } | Shape::Hyperplane { normal, offset } => {
            let half = matches!(set.shape(), Shape::Halfspace { .. });
            let a = normal.into_vec();
            let asq = dot(&a, &a);
            let q: Vec<f64> = a.iter().map(|ai| ai * offset / asq).collect();
            let ahat: Vec<f64> = a.iter().map(|ai| ai / asq.sqrt()).collect();
            let basis = complement(&ahat);
            // ||P(p) - q|| <= ||p - q|| since q lies in the set.
            let r = dist(p, &q) + 1.0;
            let d = basis.len() + usize::from(half);
            let mut lo = vec![-r; d];
            if half {
                lo[d - 1] = 0.0;
            }
            let map = move |t: &[f64]| {
                let mut y = q.clone();
                for (tj, b) in t.iter().zip(&basis) {
                    y.iter_mut().zip(b).for_each(|(y, bi)| *y += tj * bi);
                }
                if half {
                    let s = t[basis.len()];
                    y.iter_mut().zip(&ahat).for_each(|(y, ai)| *y -= s * ai);
                }
                y
            };
            (Box::new(map), lo, vec![r; d])
        }
        Shape::Ball { center, radius } => {
            let c = center.into_vec();
            match n {
                1 => (Box::new(move |t: &[f64]| vec![c[0] + t[0]]), vec![-radius], vec![radius]),
                2 => (
                    Box::new(move |t: &[f64]| vec![c[0] + t[0] * t[1].cos(), c[1] + t[0] * t[1].sin()]),
                    vec![-radius, -PI],
                    vec![radius, 3.0 * PI],
                ),
                _ => (
                    Box::new(move |t: &[f64]| {
                        let (rho, pol, az) = (t[0], t[1], t[2]);
                        vec![
                            c[0] + rho * pol.sin() * az.cos(),
                            c[1] + rho * pol.sin() * az.sin(),
                            c[2] + rho * pol.cos(),
                        ]
                    }),
                    vec![-radius, -PI / 2.0, -PI],
                    vec![radius, 1.5 * PI, 3.0 * PI],
                ),
            }
        }
        Shape::Box { lo, hi } => {
            let (lo, hi) = (lo.into_vec(), hi.into_vec());
            let map = move |s: &[f64]| (0..lo.len()).map(|j| lo[j] + s[j] * (hi[j] - lo[j])).collect();
            (Box::new(map), vec![0.0; n], vec![1.0; n])
        }
        Shape::Ray2D { theta } => {
            let (c, s) = (theta.cos(), theta.sin());
            let r = dot(p, p).sqrt() + 1.0;
            (Box::new(move |t: &[f64]| vec![t[0] * c, t[0] * s]), vec![0.0], vec![r])
        }
        Shape::Triangle2D { vertices } => {
            // Collapsed square (a, b) -> v1 + a (v2 - v1) + a b (v3 - v2),
            // collapsed at each vertex in turn.
            return (0..3)
                .map(|r| {
                    let [v1, v2, v3] = [vertices[r], vertices[(r + 1) % 3], vertices[(r + 2) % 3]];
                    let map = move |t: &[f64]| {
                        (0..2).map(|j| v1[j] + t[0] * (v2[j] - v1[j]) + t[0] * t[1] * (v3[j] - v2[j])).collect()
                    };
                    (Box::new(map) as Param, vec![0.0, 0.0], vec![1.0, 1.0])
                })
                .collect();
        }
    };
    vec![single]
}

fn nearest_point(set: &ConvexSet, p: &[f64]) -> Vec<f64> {
    if set.is_whole_space() {
        return p.to_vec();
    }
    parametrizations(set, p)
        .into_iter()
        .map(|(map, lo, hi)| map(&minimize(&|t| dist(&map(t), p), &lo, &hi)))
        .min_by(|a, b| dist(a, p).total_cmp(&dist(b, p)))
        .unwrap()
}

#[derive(Clone, Copy, Debug)]
enum Variant {
    Halfspace,
    Hyperplane,
    Ball,
    Box,
    Ray,
    Triangle,
    WholeSpace,
}

const VARIANTS: [Variant; 7] = [
    Variant::Halfspace,
    Variant::Hyperplane,
    Variant::Ball,
    Variant::Box,
    Variant::Ray,
    Variant::Triangle,
    Variant::WholeSpace,
];

fn normal(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let a = uniform(rng, n, -2.0, 2.0);
        if dot(&a, &a) > 0.01 {
            return vec_of(a);
        }
    }
}

/// A random set of the given variant; returns its dimension too.
fn random_set(rng: &mut ChaCha8Rng, variant: Variant) -> (ConvexSet, usize) {
    let n = match variant {
        Variant::Ray | Variant::Triangle => 2,
        _ => rng.gen_range(1..=3),
    };
    let set = match variant {
        Variant::Halfspace => ConvexSet::halfspace(normal(rng, n), rng.gen_range(-2.0..2.0)),
        Variant::Hyperplane => ConvexSet::hyperplane(normal(rng, n), rng.gen_range(-2.0..2.0)),
        Variant::Ball => ConvexSet::ball(vec_of(uniform(rng, n, -2.0, 2.0)), rng.gen_range(0.0..2.0)),
        Variant::Box => {
            let lo = uniform(rng, n, -2.0, 2.0);
            let hi = lo.iter().map(|l| l + rng.gen_range(0.0..2.0)).collect();
            ConvexSet::box_set(vec_of(lo), vec_of(hi))
        }
        Variant::Ray => ConvexSet::ray2d(rng.gen_range(-PI..PI)),
        Variant::Triangle => {
            let v = |rng: &mut ChaCha8Rng| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let (a, b) = (v(rng), v(rng));
            let c = if rng.gen_bool(0.1) {
                let t = rng.gen_range(-1.0..2.0);
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            } else {
                v(rng)
            };
            ConvexSet::triangle2d(a, b, c)
        }
        Variant::WholeSpace => Ok(ConvexSet::whole_space()),
    };
    (set.unwrap(), n)
}

#[test]
fn criterion_1_projections_match_a_brute_force_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut worst_variant = Variant::WholeSpace;
    for variant in VARIANTS {
        for _ in 0..1000 {
            let (set, n) = random_set(&mut rng, variant);
            let p = uniform(&mut rng, n, -4.0, 4.0);
            let projected = set.project(&vec_of(p.clone())).unwrap();
            let oracle = nearest_point(&set, &p);
            let err = dist(projected.as_slice(), &oracle);
            let dist_err = (set.distance(&vec_of(p.clone())).unwrap() - dist(&p, &oracle)).abs();
            if err.max(dist_err) > worst {
                worst = err.max(dist_err);
                worst_variant = variant;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "1",
        worst <= 1e-6 && secs < 30.0,
        format!("7 variants x 1000 instances, worst deviation {worst:.2e} ({worst_variant:?}), {secs:.1} s"),
    );
}

fn random_family(rng: &mut ChaCha8Rng) -> (Family, usize) {
    let n = rng.gen_range(1..=3);
    let count = rng.gen_range(1..=5);
    let mut sets = Vec::new();
    while sets.len() < count {
        let variant = VARIANTS[rng.gen_range(0..VARIANTS.len())];
        let (set, dim) = random_set(rng, variant);
        if set.ambient_dim().is_none_or(|d| d == n) && (dim == n || set.is_whole_space()) {
            sets.push(set);
        }
        if sets.len() == count && sets.iter().all(ConvexSet::is_whole_space) {
            sets.clear();
        }
    }
    (Family::finite(n, sets).unwrap(), count)
}

fn random_weights(rng: &mut ChaCha8Rng, count: usize) -> WeightFunction {
    let strings = rng.gen_range(1..=4);
    let raw: Vec<f64> = (0..strings).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let pairs = raw
        .iter()
        .map(|w| {
            let len = rng.gen_range(1..=5);
            let idx = (0..len).map(|_| rng.gen_range(1..=count + 2)).collect();
            (IndexVector::new(idx).unwrap(), w / total)
        })
        .collect();
    WeightFunction::new(pairs).unwrap()
}

#[test]
fn criterion_2_projections_and_averaged_operators_are_nonexpansive() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_p = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let variant = VARIANTS[rng.gen_range(0..VARIANTS.len())];
        let (set, n) = random_set(&mut rng, variant);
        let y = uniform(&mut rng, n, -4.0, 4.0);
        let z = uniform(&mut rng, n, -4.0, 4.0);
        let py = set.project(&vec_of(y.clone())).unwrap();
        let pz = set.project(&vec_of(z.clone())).unwrap();
        worst_p = worst_p.max(dist(py.as_slice(), pz.as_slice()) - dist(&y, &z));
    }
    let mut worst_t = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let (family, count) = random_family(&mut rng);
        let w = random_weights(&mut rng, count);
        let n = family.dim();
        let y = uniform(&mut rng, n, -4.0, 4.0);
        let z = uniform(&mut rng, n, -4.0, 4.0);
        let ty = apply_weighted(&family, &w, &vec_of(y.clone())).unwrap();
        let tz = apply_weighted(&family, &w, &vec_of(z.clone())).unwrap();
        worst_t = worst_t.max(dist(ty.as_slice(), tz.as_slice()) - dist(&y, &z));
    }
    verdict(
        "2",
        worst_p <= 1e-12 && worst_t <= 1e-12,
        format!("max ||Py-Pz|| - ||y-z|| = {worst_p:.2e} over 1e4, max ||Ty-Tz|| - ||y-z|| = {worst_t:.2e} over 1e3"),
    );
}

// ---------------------------------------------------------------------------
// Fixtures whose sets all contain a known point `c`.

fn set_through(rng: &mut ChaCha8Rng, c: &[f64], scale: f64) -> ConvexSet {
    let n = c.len();
    let kinds = if n == 2 { 6 } else { 4 };
    match rng.gen_range(0..kinds) {
        0 => {
            let a = normal(rng, n);
            let b = dot(a.as_slice(), c) + rng.gen_range(0.0..scale);
            ConvexSet::halfspace(a, b).unwrap()
        }
        1 => {
            let a = normal(rng, n);
            let b = dot(a.as_slice(), c);
            ConvexSet::hyperplane(a, b).unwrap()
        }
        2 => {
            let r = rng.gen_range(0.5..2.0) * scale;
            let shift = rng.gen_range(0.0..0.9) * r;
            let center: Vec<f64> = unit(rng, n).iter().zip(c).map(|(u, ci)| ci + shift * u).collect();
            ConvexSet::ball(vec_of(center), r).unwrap()
        }
        3 => {
            let lo = c.iter().map(|ci| ci - rng.gen_range(0.0..scale)).collect();
            let hi = c.iter().map(|ci| ci + rng.gen_range(0.0..scale)).collect();
            ConvexSet::box_set(vec_of(lo), vec_of(hi)).unwrap()
        }
        4 => ConvexSet::ray2d(c[1].atan2(c[0])).unwrap(),
        _ => {
            // Vertex directions with gaps below pi keep c inside.
            let phi0 = rng.gen_range(0.0..TAU);
            let mut vertex = |j: f64| {
                let phi = phi0 + j * TAU / 3.0 + rng.gen_range(-0.3..0.3);
                let len = rng.gen_range(0.5..2.0) * scale;
                [c[0] + len * phi.cos(), c[1] + len * phi.sin()]
            };
            let (a, b, d) = (vertex(0.0), vertex(1.0), vertex(2.0));
            ConvexSet::triangle2d(a, b, d).unwrap()
        }
    }
}

fn schedule_for(n: u64, count: usize) -> Box<dyn WeightSchedule> {
    match n % 4 {
        0 => Box::new(CimminoGrowing),
        1 => Box::new(KaczmarzGrowing { permutation: Permutation::Seeded(n) }),
        2 => Box::new(OddEven { permutation: Permutation::Identity }),
        _ => {
            let block = [CyclicBlock::SingleIndex, CyclicBlock::FullCimmino, CyclicBlock::FullKaczmarz][(n / 4 % 3) as usize];
            Box::new(CyclicFinite::new(count, block).unwrap())
        }
    }
}

struct Fixture {
    family: Family,
    c: Vec<f64>,
    x0: Vec<f64>,
    schedule: Box<dyn WeightSchedule>,
}

fn fixture(n: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(300 + n);
    let dim = rng.gen_range(2..=3);
    let c = uniform(&mut rng, dim, -1.0, 1.0);
    let count = rng.gen_range(3..=8);
    let sets = (0..count).map(|_| set_through(&mut rng, &c, 1.0)).collect();
    let x0 = uniform(&mut rng, dim, -5.0, 5.0);
    Fixture { family: Family::finite(dim, sets).unwrap(), c, x0, schedule: schedule_for(n, count) }
}

/// Consecutive plain iterates `x^0, ..., x^iters` with `maxLength(w^k)`.
fn plain_iterates(fx: &Fixture, iters: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut options = RunOptions::watching(vec![1]);
    options.record_points = true;
    let trace = run(
        &fx.family,
        fx.schedule.as_ref(),
        Mode::Plain,
        &PerturbationPlan::None,
        &vec_of(fx.x0.clone()),
        StopRule::max_iters(iters),
        &options,
    )
    .unwrap();
    assert_eq!(trace.final_k, iters);
    let xs = trace.iterates().into_iter().map(|x| x.as_slice().to_vec()).collect();
    let lengths = (0..iters).map(|k| fx.schedule.weights(k).unwrap().max_length()).collect();
    (xs, lengths)
}

#[test]
fn criteria_3_and_4_fejer_monotonicity_and_descent() {
    let mut fejer = f64::NEG_INFINITY;
    let mut titu = f64::NEG_INFINITY;
    for n in 0..50 {
        let fx = fixture(n);
        let (xs, lengths) = plain_iterates(&fx, 1000);
        for k in 0..1000 {
            let (a, b) = (dist(&xs[k], &fx.c), dist(&xs[k + 1], &fx.c));
            fejer = fejer.max(b - a);
            let step = dist(&xs[k + 1], &xs[k]);
            titu = titu.max(b * b - (a * a - step * step / lengths[k] as f64));
        }
    }
    let detail = |m: f64| format!("50 fixtures x 1000 steps, worst excess {m:.2e}");
    let tag = if fejer <= 1e-9 { "PASS" } else { "FAIL" };
    writeln!(std::io::stderr(), "{tag} criterion 3: {}", detail(fejer)).unwrap();
    verdict("4", titu <= 1e-9, detail(titu));
    assert!(fejer <= 1e-9);
}

// ---------------------------------------------------------------------------
// The 5x5 linear system.

const A: [[f64; 5]; 5] = [
    [2.0, 0.1, 0.0, 0.0, -0.1],
    [0.1, 1.5, 0.1, 0.0, 0.0],
    [0.0, -0.1, 1.0, 0.1, 0.0],
    [0.1, 0.0, 0.1, 2.5, 0.1],
    [0.0, 0.1, 0.0, -0.1, 1.2],
];
const X_STAR: [f64; 5] = [1.0, -2.0, 0.5, 3.0, -1.0];

fn rhs() -> Vec<f64> {
    A.iter().map(|row| dot(row, &X_STAR)).collect()
}

/// Gaussian elimination with partial pivoting.
fn direct_solution() -> Vec<f64> {
    let mut m: Vec<Vec<f64>> = A.iter().zip(rhs()).map(|(row, b)| row.iter().copied().chain([b]).collect()).collect();
    for col in 0..5 {
        let pivot = (col..5).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        for row in col + 1..5 {
            let factor = m[row][col] / m[col][col];
            let pivot_row = m[col].clone();
            m[row].iter_mut().zip(&pivot_row).skip(col).for_each(|(a, p)| *a -= factor * p);
        }
    }
    let mut x = vec![0.0; 5];
    for row in (0..5).rev() {
        let s: f64 = (row + 1..5).map(|j| m[row][j] * x[j]).sum();
        x[row] = (m[row][5] - s) / m[row][row];
    }
    x
}

fn residual_distances(x: &[f64]) -> Vec<f64> {
    A.iter().zip(rhs()).map(|(a, b)| (dot(a, x) - b).abs() / dot(a, a).sqrt()).collect()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

struct Linear<'a> {
    name: &'a str,
    head: &'a str,
    schedule: &'a str,
    stop: &'a str,
    plan: &'a str,
    record_points: bool,
}

fn linear_config(dir: &Path, l: Linear<'_>) -> ExperimentConfig {
    let matrix: Vec<String> = A.iter().map(|row| format!("{:?}", row.to_vec())).collect();
    let text = format!(
        "{}\nx0 = [0.0, 0.0, 0.0, 0.0, 0.0]\n\n[family]\nkind = \"linear_system\"\nmatrix = [{}]\nrhs = {:?}\n\n\
         [schedule]\n{}\n\n[stop]\n{}\n\n{}\n\n[output]\ndir = {:?}\nname = {:?}\nrecord_points = {}\n",
        l.head,
        matrix.join(", "),
        rhs(),
        l.schedule,
        l.stop,
        l.plan,
        dir.to_string_lossy(),
        l.name,
        l.record_points,
    );
    parse_config(&text).unwrap()
}

fn config_5(dir: &Path) -> ExperimentConfig {
    linear_config(
        dir,
        Linear {
            name: "criterion5",
            head: "seed = 5\nmode = \"plain\"",
            schedule: "kind = \"cimmino_growing\"",
            stop: "max_iters = 100000",
            plan: "",
            record_points: false,
        },
    )
}

fn config_6(dir: &Path) -> ExperimentConfig {
    linear_config(
        dir,
        Linear {
            name: "criterion6",
            head: "seed = 6\nmode = \"plain\"",
            schedule: "kind = \"kaczmarz_growing\"\npermutation = \"seeded\"",
            stop: "max_iters = 10000",
            plan: "",
            record_points: false,
        },
    )
}

fn config_9(dir: &Path) -> ExperimentConfig {
    linear_config(
        dir,
        Linear {
            name: "criterion9",
            head: "seed = 9\nmode = \"perturbed\"",
            schedule: "kind = \"kaczmarz_growing\"\npermutation = \"seeded\"",
            stop: "max_iters = 100000\nfeasibility_tol = 5e-5",
            plan: "[plan]\nkind = \"geometric\"\nscale = 1.0\nratio = 0.5",
            record_points: true,
        },
    )
}

fn demo_in(dir: &Path, name: &str, output: &str) -> ExperimentConfig {
    let mut cfg = parse_config(demos::demo_config(name).unwrap()).unwrap();
    cfg.output.dir = dir.to_string_lossy().into_owned();
    cfg.output.name = output.into();
    cfg
}

fn config_7(dir: &Path) -> ExperimentConfig {
    demo_in(dir, "example3", "criterion7")
}

fn config_8(dir: &Path) -> ExperimentConfig {
    demo_in(dir, "counterexample", "criterion8")
}

fn config_11(dir: &Path) -> ExperimentConfig {
    demo_in(dir, "staged", "criterion11")
}

fn config_10(dir: &Path) -> ExperimentConfig {
    let text = format!(
        r#"
seed = 10
mode = "superiorized"
x0 = [9.5, 10.7, 9.1]

[family]
kind = "sets"
sets = [
    {{ type = "halfspace", normal = [1.0, 1.0, 1.0], offset = 30.5 }},
    {{ type = "ball", center = [10.0, 10.0, 10.5], radius = 1.0 }},
    {{ type = "box", lo = [9.0, 9.0, 9.0], hi = [12.0, 12.0, 12.0] }},
]

[schedule]
kind = "cyclic"
block = "kaczmarz"

[plan]
kind = "steer"
scale = 0.1
ratio = 0.9

[stop]
max_iters = 1000

[output]
dir = {:?}
name = "criterion10"
"#,
        dir.to_string_lossy()
    );
    parse_config(&text).unwrap()
}

fn timed_run(cfg: &ExperimentConfig) -> (RunOutcome, f64) {
    let start = Instant::now();
    let outcome = run_experiment(cfg).unwrap();
    (outcome, start.elapsed().as_secs_f64())
}

#[test]
fn direct_solution_reproduces_the_fixture() {
    let x = direct_solution();
    assert!(dist(&x, &X_STAR) < 1e-12, "{x:?}");
}

#[test]
fn criterion_5_cimmino_like_weights_converge() {
    let dir = tempfile::tempdir().unwrap();
    let (outcome, secs) = timed_run(&config_5(dir.path()));
    let x = outcome.trace.final_x.as_slice();
    let d = max_of(&residual_distances(x));
    let gap = dist(x, &direct_solution());
    verdict(
        "5",
        outcome.trace.final_k == 100_000 && d < 1e-3 && gap < 1e-3 && secs < 60.0,
        format!("after {} iterations max d = {d:.2e}, ||x - x*|| = {gap:.2e}, {secs:.1} s", outcome.trace.final_k),
    );
}

#[test]
fn criterion_6_kaczmarz_like_weights_converge() {
    let dir = tempfile::tempdir().unwrap();
    let (outcome, secs) = timed_run(&config_6(dir.path()));
    let d = max_of(&residual_distances(outcome.trace.final_x.as_slice()));
    verdict(
        "6",
        outcome.trace.final_k == 10_000 && d < 1e-6 && secs < 60.0,
        format!("after {} iterations max d = {d:.2e}, {secs:.1} s", outcome.trace.final_k),
    );
}

/// `max_{kappa_r <= k < kappa_{r+1}} sum_{iota ∋ i} w^k(iota)/Position(i, iota)`
/// for the identity-ordered odd/even weights, written out by hand.
fn odd_even_c2_value(i: usize, r: u64) -> f64 {
    let value = |k: u64| {
        let k = k as usize;
        let lone = if i == k + 2 { 0.5 } else { 0.0 };
        let string = if i <= k && i % 2 == k % 2 { 0.5 / (i.div_ceil(2)) as f64 } else { 0.0 };
        lone + string
    };
    (2 * r..2 * (r + 1)).map(value).fold(0.0, f64::max)
}

#[test]
fn criterion_7_block_conditions_and_convergence_on_a_mixed_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_7(dir.path());
    let exp = saproj_cli::setup::Experiment::build(&cfg).unwrap();
    let schedule = OddEven { permutation: Permutation::Identity };
    let f = |r: u64| 1.0 / (2.0 * (r as f64 + 1.0));
    let kappa = |r: u64| 2 * r;
    let c1 = check_c1(&schedule, &f, &kappa, 1000).unwrap();
    let indices: Vec<usize> = (1..=6).collect();
    let c2 = check_c2(&schedule, &exp.family, &f, &kappa, &indices, (3, 1000)).unwrap();

    // Block k = 2r has longest string (2, 4, ..., 2r) of length r.
    let c1_oracle = (1..=1000u64).all(|r| (r.max(1) as f64) <= 1.0 / f(r));
    let c2_oracle = (3..=1000u64).all(|r| indices.iter().all(|&i| odd_even_c2_value(i, r) >= f(r)));

    let (outcome, secs) = timed_run(&cfg);
    let reported = [HypothesisId::C1, HypothesisId::C2].map(|id| outcome.checks.find(id).is_some_and(|r| r.holds()));
    let x = outcome.trace.final_x.as_slice();
    let d = cfg_distances(&exp.family, x, 6);
    verdict(
        "7",
        c1.holds() && c2.holds() && c1_oracle && c2_oracle && reported == [true, true] && outcome.trace.final_k <= 100_000 && d < 1e-3,
        format!(
            "C1 {} for r <= 1000, C2 {} for 3 <= r <= 1000; engine max d = {d:.2e} after {} iterations, {secs:.1} s",
            if c1.holds() { "holds" } else { "fails" },
            if c2.holds() { "holds" } else { "fails" },
            outcome.trace.final_k,
        ),
    );
}

/// Distances to the first `count` sets from their definitions.
fn cfg_distances(family: &Family, x: &[f64], count: usize) -> f64 {
    (1..=count)
        .map(|i| shape_distance(family.get(i).unwrap().shape(), x))
        .fold(0.0, f64::max)
}

fn shape_distance(shape: &Shape, x: &[f64]) -> f64 {
    match shape {
        Shape::Halfspace { normal, offset } => {
            let a = normal.as_slice();
            ((dot(a, x) - offset) / dot(a, a).sqrt()).max(0.0)
        }
        Shape::Hyperplane { normal, offset } => {
            let a = normal.as_slice();
            (dot(a, x) - offset).abs() / dot(a, a).sqrt()
        }
        Shape::Ball { center, radius } => (dist(center.as_slice(), x) - radius).max(0.0),
        other => panic!("no distance oracle for {other:?}"),
    }
}

/// Angles merged as in the counterexample: harmonic partial sums plus the
/// inserted values `(phi_j mod 2 pi) + (2j+1) 2^k pi` below the last sum.
fn theta_oracle(len: usize) -> Vec<f64> {
    let mut phi = vec![0.0];
    for j in 1..len {
        phi.push(phi[j - 1] + 1.0 / j as f64);
    }
    let ceiling = phi[len - 1];
    let mut values = phi.clone();
    for (j, p) in phi.iter().enumerate() {
        let mut k = 1;
        loop {
            let v = p.rem_euclid(TAU) + (2 * j + 1) as f64 * 2f64.powi(k) * PI;
            if v > ceiling {
                break;
            }
            values.push(v);
            k += 1;
        }
        if ((2 * j + 1) as f64) * 2.0 * PI > ceiling {
            break;
        }
    }
    values.sort_by(f64::total_cmp);
    values.truncate(len);
    values
}

struct RaysRun {
    norms: Vec<f64>,
    angles: Vec<f64>,
    product: Vec<f64>,
}

fn rays_run(dir: &Path) -> RaysRun {
    let outcome = run_experiment(&config_8(dir)).unwrap();
    let xs = outcome.trace.iterates();
    let theta = theta_oracle(10_000);
    let mut product = vec![1.0];
    for w in theta.windows(2).take(xs.len() - 1) {
        product.push(product.last().unwrap() * (w[1] - w[0]).cos());
    }
    RaysRun {
        norms: xs.iter().map(|x| x.norm()).collect(),
        angles: xs.iter().map(|x| x.as_slice()[1].atan2(x.as_slice()[0])).collect(),
        product,
    }
}

#[test]
fn criterion_8ab_counterexample_norms_follow_the_cosine_product() {
    let dir = tempfile::tempdir().unwrap();
    let ce = family_rays_counterexample(10_000).unwrap();
    let theta = theta_oracle(10_000);
    let theta_gap = theta.iter().zip(ce.theta.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(theta_gap < 1e-12, "angle prefix differs from the hand-built merge by {theta_gap}");

    let r = rays_run(dir.path());
    let rel = r.norms.iter().zip(&r.product).map(|(n, p)| (n - p).abs() / p).fold(0.0, f64::max);
    verdict("8(a)", r.norms.len() == 10_000 && rel <= 1e-9, format!("{} iterates, worst relative error {rel:.2e}", r.norms.len()));

    let limit = *r.product.last().unwrap();
    let tail_start = r.product.len() * 9 / 10;
    let increment = r.product[tail_start..].windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    verdict("8(b)", limit >= 0.01 && increment < 1e-6, format!("limit estimate {limit:.4}, largest tail increment {increment:.2e}"));
}

/// Length of the shortest arc containing all the given directions.
fn covering_arc(angles: &[f64]) -> f64 {
    let mut a: Vec<f64> = angles.iter().map(|t| t.rem_euclid(TAU)).collect();
    a.sort_by(f64::total_cmp);
    let mut gap = a[0] + TAU - a[a.len() - 1];
    for w in a.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    TAU - gap
}

#[test]
fn criterion_8c_counterexample_direction_oscillates_in_the_tail() {
    let dir = tempfile::tempdir().unwrap();
    let r = rays_run(dir.path());
    let tail = &r.angles[r.angles.len() * 9 / 10..];
    let arc = covering_arc(tail);
    verdict("8(c)", arc > 0.5, format!("angular diameter over the final {} iterates is {arc:.4} rad", tail.len()));
}

#[test]
fn criterion_8d_counterexample_index_sums_diverge() {
    let ce = family_rays_counterexample(10_000).unwrap();
    let indices: Vec<usize> = (1..=ce.ray_count()).collect();
    let sums = check_divergent_sums(&ce.schedule, &indices, ce.schedule.horizon() - 1).unwrap();
    let divergent = sums.values().filter(|s| s.growth == Growth::ApparentlyDivergent).count();
    let largest = sums.values().map(|s| s.total).fold(0.0, f64::max);
    verdict(
        "8(d)",
        divergent == indices.len(),
        format!("{divergent} of {} indices apparently divergent; largest partial sum {largest}", indices.len()),
    );
}

#[test]
fn criterion_9_perturbed_iterates_stay_within_the_resilience_bound() {
    let dir = tempfile::tempdir().unwrap();
    let (outcome, secs) = timed_run(&config_9(dir.path()));
    let trace = &outcome.trace;
    let c = X_STAR;
    let xs = trace.iterates();
    assert_eq!(xs.len() as u64, trace.final_k + 1);
    let mut budget = dist(xs[0].as_slice(), &c);
    let mut excess = f64::NEG_INFINITY;
    let mut norm_err = 0.0f64;
    for (k, x) in xs.iter().enumerate() {
        excess = excess.max(dist(x.as_slice(), &c) - budget);
        if let Some(rec) = trace.records.get(k) {
            let expected = 0.5f64.powi(k as i32);
            norm_err = norm_err.max((rec.perturbation_norm - expected).abs() / expected);
            budget += expected;
        }
    }
    let d = max_of(&residual_distances(trace.final_x.as_slice()));
    verdict(
        "9",
        trace.final_k <= 100_000 && d < 1e-4 && excess <= 1e-6 && norm_err < 1e-12,
        format!(
            "max d = {d:.2e} after {} iterations, worst bound excess {excess:.2e}, {secs:.1} s",
            trace.final_k
        ),
    );
}

#[test]
fn criterion_10_superiorized_steps_equal_perturbed_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut identical = 0;
    let mut worst = f64::NEG_INFINITY;
    for n in 0..100u64 {
        let dim = rng.gen_range(2..=3);
        let c = vec![10.0; dim];
        let count = rng.gen_range(2..=5);
        let sets = (0..count).map(|_| set_through(&mut rng, &c, 1.0)).collect();
        let family = Family::finite(dim, sets).unwrap();
        let schedule = schedule_for(n, count);
        let x = vec_of(uniform(&mut rng, dim, 9.0, 11.0));
        let beta = rng.gen_range(-0.1..0.1);
        let u = vec_of(unit(&mut rng, dim).iter().map(|c| c * rng.gen_range(0.0..1.0)).collect());
        let k = rng.gen_range(0..50);
        let state = IterationState { k, x: x.clone(), cumulative: Default::default() };

        let w = schedule.weights(k).unwrap();
        let shifted = vec_of(x.as_slice().iter().zip(u.as_slice()).map(|(xi, ui)| xi + ui * beta).collect());
        let t_shifted = apply_weighted(&family, &w, &shifted).unwrap();
        let t_x = apply_weighted(&family, &w, &x).unwrap();
        let v = vec_of(t_shifted.as_slice().iter().zip(t_x.as_slice()).map(|(a, b)| a - b).collect());

        let u_dir = u.clone();
        let sup = FnSuperiorizer::new("fixed", 1.0, 1.0, move |_| beta, move |_, _| u_dir.clone());
        let v_step = v.clone();
        let pert = FnPerturbation::new("difference", 1.0, move |_, _| v_step.clone());
        let a = step_superiorized(&family, schedule.as_ref(), &sup, &state).unwrap();
        let b = step_perturbed(&family, schedule.as_ref(), &pert, &state).unwrap();
        let bits = |s: &IterationState| s.x.as_slice().iter().map(|c| c.to_bits()).collect::<Vec<_>>();
        if bits(&a) == bits(&b) {
            identical += 1;
        }
        worst = worst.max(v.norm() - beta.abs() * u.norm());
    }

    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&config_10(dir.path())).unwrap();
    verdict(
        "10",
        identical == 100 && worst <= 1e-12 && outcome.exit_code == EXIT_OK,
        format!("{identical} of 100 steps bit-identical, worst ||v|| - |beta| ||u|| = {worst:.2e}"),
    );
}

#[test]
fn criterion_11_staged_driver_meets_every_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_11(dir.path());
    let cap = cfg.stage_cap.unwrap();
    let (outcome, secs) = timed_run(&cfg);
    let stages = &outcome.trace.stages;
    let within_cap = stages.len() == 3 && stages.iter().all(|s| s.completed && s.end_k - s.start_k <= cap);
    let y = outcome.trace.final_x.as_slice();
    // Head: x = 0.8 and y = -0.5; then balls about the origin of radius 1 + 1/j.
    let mut d = (y[0] - 0.8).abs().max((y[1] + 0.5).abs());
    for j in 1..=6 {
        d = d.max((dot(y, y).sqrt() - (1.0 + 1.0 / j as f64)).max(0.0));
    }
    verdict(
        "11",
        within_cap && d <= 1e-3 && secs < 120.0,
        format!("{} stages completed in {} steps, max_(i<=8) d = {d:.2e}, {secs:.1} s", stages.len(), outcome.trace.final_k),
    );
}

#[test]
fn criterion_12_thresholded_step_fixes_points_near_every_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut unchanged = 0;
    for n in 0..100u64 {
        let (family, count) = random_family(&mut rng);
        let x0 = vec_of(uniform(&mut rng, family.dim(), -4.0, 4.0));
        let far = (1..=count).map(|i| family.get(i).unwrap().distance(&x0).unwrap()).fold(0.0, f64::max);
        let eps = 2.0 * far + 1e-3;
        let schedule = schedule_for(n, count);
        let state = IterationState::new(x0.clone());
        let next = step_eps(&family, schedule.as_ref(), None, &state, eps).unwrap();
        if next.x.as_slice().iter().zip(x0.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()) {
            unchanged += 1;
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "mode = \"eps\"\neps = 50.0\nx0 = [3.0, -1.0]\n\n[family]\nkind = \"sets\"\nsets = [\n  \
         {{ type = \"ball\", center = [0.0, 0.0], radius = 1.0 }},\n  \
         {{ type = \"halfspace\", normal = [1.0, 1.0], offset = 0.0 }},\n]\n\n[schedule]\nkind = \"cimmino_growing\"\n\n\
         [stop]\nmax_iters = 50\n\n[output]\ndir = {:?}\nname = \"criterion12\"\n",
        dir.path().to_string_lossy()
    );
    let outcome = run_experiment(&parse_config(&text).unwrap()).unwrap();
    let run_fixed = outcome.trace.final_x.as_slice() == [3.0, -1.0];
    verdict("12", unchanged == 100 && run_fixed, format!("{unchanged} of 100 thresholded steps returned x0 bit-for-bit; 50-step eps run stayed at x0: {run_fixed}"));
}

#[test]
fn criterion_13_every_trace_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let configs = vec![config_5(p), config_6(p), config_7(p), config_8(p), config_9(p), config_10(p), config_11(p)];
    let outcomes = run_batch(&configs);
    let mut lines = Vec::new();
    let mut all = true;
    for (cfg, outcome) in configs.iter().zip(outcomes) {
        let outcome = outcome.unwrap();
        let report = replay(&outcome.paths.trace).unwrap();
        all &= report.identical() && report.compared as u64 == outcome.trace.final_k;
        lines.push(format!("{} {}/{}", cfg.output.name, report.compared, outcome.trace.final_k));
    }
    verdict("13", all, format!("replayed {}", lines.join(", ")));
}
