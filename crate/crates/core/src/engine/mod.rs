//! Iteration drivers.
//!
//! One step evaluates the weighted operator
//! `T_k(x) = sum_iota w^k(iota) P[iota](x)` and combines it with an optional
//! perturbation or steering term. [`run`] repeats steps until a [`StopRule`]
//! fires; [`run_staged_eps`] chains thresholded runs with shrinking
//! tolerances.
//!
//! All sums over the support of a weight function are taken in canonical
//! order: the end-points of strings that move the point, in lexicographic
//! order of their index vectors, followed by the total weight of strings that
//! act as the identity times the point itself. Runs are therefore
//! bit-for-bit reproducible.

mod plan;
mod trace;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use plan::{
    random_unit_vector, FnPerturbation, FnSuperiorizer, GeometricPerturbation, GeometricSuperiorizer, Perturbation,
    PerturbationPlan, Superiorizer, SteeringTarget,
};
pub use trace::{RunMeta, StageMarker, StepRecord, StopReason, Trace, WeightSummary};

use crate::geometry::{vector_dims, Family, FamilyKind, Vector};
use crate::math;
use crate::strings::{check_eps, string_endpoint};
use crate::weights::{Support, WeightFunction, WeightSchedule};
use crate::{Error, Result};

/// Default per-stage iteration cap of [`run_staged_eps`].
pub const DEFAULT_STAGE_CAP: u64 = 1_000_000;

/// Iteration number, current iterate and running weight sums.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationState {
    pub k: u64,
    pub x: Vector,
    /// `sum_{j < k} index_weight_sum(w^j, i)` for each tracked index `i`.
    pub cumulative: BTreeMap<usize, f64>,
}

impl IterationState {
    pub fn new(x: Vector) -> Self {
        IterationState { k: 0, x, cumulative: BTreeMap::new() }
    }

    /// Starts tracking the running weight sums of `indices`.
    pub fn tracking(x: Vector, indices: &[usize]) -> Self {
        IterationState { k: 0, x, cumulative: indices.iter().map(|&i| (i, 0.0)).collect() }
    }

    fn advanced(&self, x: Vector, w: &WeightFunction) -> Self {
        let cumulative = self.cumulative.iter().map(|(&i, &s)| (i, s + w.index_weight_sum(i))).collect();
        IterationState { k: self.k + 1, x, cumulative }
    }
}

fn is_identity_string(family: &Family, indices: &[usize]) -> Result<bool> {
    let trivial_from = family.trivial_from();
    for &i in indices {
        if trivial_from.is_some_and(|t| i >= t) {
            continue;
        }
        if !family.is_whole_space(i)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn weighted_average(family: &Family, w: &WeightFunction, x: &[f64], eps: Option<f64>) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; x.len()];
    let mut identity_mass = 0.0;
    // When every endpoint is `x` itself the average is `x`; rounding the sum
    // would otherwise move it.
    let mut all_fixed = true;
    let add = |acc: &mut Vec<f64>, weight: f64, p: &[f64]| {
        for (a, c) in acc.iter_mut().zip(p) {
            *a += weight * c;
        }
    };
    match w.support() {
        Support::Entries(entries) => {
            for (iota, weight) in entries {
                if is_identity_string(family, iota.indices())? {
                    identity_mass += weight;
                } else {
                    let p = string_endpoint(family, iota.indices(), x, eps)?;
                    all_fixed &= p == x;
                    add(&mut acc, *weight, &p);
                }
            }
        }
        Support::UniformSingletons { count, weight } => {
            let moving = match family.trivial_from() {
                Some(t) => count.min(t - 1),
                None => count,
            };
            for i in 1..=moving {
                if family.is_whole_space(i)? {
                    identity_mass += weight;
                } else {
                    let p = string_endpoint(family, &[i], x, eps)?;
                    all_fixed &= p == x;
                    add(&mut acc, weight, &p);
                }
            }
            identity_mass += (count - moving) as f64 * weight;
        }
    }
    if all_fixed {
        return Ok(x.to_vec());
    }
    if identity_mass > 0.0 {
        add(&mut acc, identity_mass, x);
    }
    Ok(acc)
}

/// `T(x) = sum_iota w(iota) P[iota](x)`.
pub fn apply_weighted(family: &Family, w: &WeightFunction, x: &Vector) -> Result<Vector> {
    vector_dims(family.dim(), x)?;
    Ok(Vector::from_raw(weighted_average(family, w, x.as_slice(), None)?))
}

/// `T^eps(x) = sum_iota w(iota) P^eps[iota](x)`.
pub fn apply_weighted_eps(family: &Family, w: &WeightFunction, x: &Vector, eps: f64) -> Result<Vector> {
    check_eps(eps)?;
    vector_dims(family.dim(), x)?;
    Ok(Vector::from_raw(weighted_average(family, w, x.as_slice(), Some(eps))?))
}

fn add_vectors(a: &Vector, b: &Vector) -> Result<Vector> {
    vector_dims(a.dim(), b)?;
    Ok(Vector::from_raw(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x + y).collect()))
}

/// Update rule of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Plain,
    /// Plain update plus `v^k`.
    Perturbed,
    /// `T_k(x^k + beta_k u^k)`.
    Superiorized,
    /// Thresholded projections, plus `v^k` when an additive plan is given.
    Eps(f64),
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Plain => "plain",
            Mode::Perturbed => "perturbed",
            Mode::Superiorized => "superiorized",
            Mode::Eps(_) => "eps",
        }
    }

    fn eps(&self) -> Option<f64> {
        match self {
            Mode::Eps(e) => Some(*e),
            _ => None,
        }
    }

    fn check_plan(&self, plan: &PerturbationPlan) -> Result<()> {
        let ok = matches!(
            (self, plan),
            (Mode::Plain, PerturbationPlan::None)
                | (Mode::Perturbed, PerturbationPlan::Additive(_))
                | (Mode::Superiorized, PerturbationPlan::Steering(_))
                | (Mode::Eps(_), PerturbationPlan::None | PerturbationPlan::Additive(_))
        );
        if !ok {
            return Err(Error::InvalidParameter(format!("{} mode cannot use plan {}", self.label(), plan.describe())));
        }
        if let Mode::Eps(e) = self {
            check_eps(*e)?;
        }
        Ok(())
    }
}

/// Result of one update, before it is committed to the state.
struct Update {
    x: Vector,
    perturbation_norm: f64,
}

/// Computes `x^{k+1}` from `x` given the weight function `w` and the
/// iteration number `k` seen by the plan.
fn update(family: &Family, w: &WeightFunction, mode: Mode, plan: &PerturbationPlan, k: u64, x: &Vector) -> Result<Update> {
    match plan {
        PerturbationPlan::Steering(s) => {
            let beta = s.step_size(k);
            let u = s.direction(k, x);
            vector_dims(x.dim(), &u)?;
            let shifted = add_vectors(x, &u.scaled(beta))?;
            let next = weighted_average(family, w, shifted.as_slice(), mode.eps())?;
            Ok(Update { x: Vector::from_raw(next), perturbation_norm: libm::fabs(beta) * u.norm() })
        }
        PerturbationPlan::Additive(p) => {
            let base = Vector::from_raw(weighted_average(family, w, x.as_slice(), mode.eps())?);
            let v = p.vector(k, x.dim());
            let perturbation_norm = v.norm();
            Ok(Update { x: add_vectors(&base, &v)?, perturbation_norm })
        }
        PerturbationPlan::None => {
            let next = weighted_average(family, w, x.as_slice(), mode.eps())?;
            Ok(Update { x: Vector::from_raw(next), perturbation_norm: 0.0 })
        }
    }
}

fn step_with(
    family: &Family,
    schedule: &dyn WeightSchedule,
    mode: Mode,
    plan: &PerturbationPlan,
    state: &IterationState,
) -> Result<IterationState> {
    vector_dims(family.dim(), &state.x)?;
    let w = schedule.weights(state.k)?;
    let u = update(family, &w, mode, plan, state.k, &state.x)?;
    Ok(state.advanced(u.x, &w))
}

/// `x^{k+1} = sum_iota w^k(iota) P[iota](x^k)`.
pub fn step_plain(family: &Family, schedule: &dyn WeightSchedule, state: &IterationState) -> Result<IterationState> {
    step_with(family, schedule, Mode::Plain, &PerturbationPlan::None, state)
}

/// Plain update plus `v^k`.
pub fn step_perturbed(
    family: &Family,
    schedule: &dyn WeightSchedule,
    plan: &dyn Perturbation,
    state: &IterationState,
) -> Result<IterationState> {
    vector_dims(family.dim(), &state.x)?;
    let w = schedule.weights(state.k)?;
    let base = Vector::from_raw(weighted_average(family, &w, state.x.as_slice(), None)?);
    let next = add_vectors(&base, &plan.vector(state.k, state.x.dim()))?;
    Ok(state.advanced(next, &w))
}

/// `x^{k+1} = T_k(x^k + beta_k u^k)`.
pub fn step_superiorized(
    family: &Family,
    schedule: &dyn WeightSchedule,
    plan: &dyn Superiorizer,
    state: &IterationState,
) -> Result<IterationState> {
    vector_dims(family.dim(), &state.x)?;
    let w = schedule.weights(state.k)?;
    let u = plan.direction(state.k, &state.x);
    let shifted = add_vectors(&state.x, &u.scaled(plan.step_size(state.k)))?;
    let next = weighted_average(family, &w, shifted.as_slice(), None)?;
    Ok(state.advanced(Vector::from_raw(next), &w))
}

/// `x^{k+1} = sum_iota w^k(iota) P^eps[iota](x^k) + v^k`, with `v^k = 0` when
/// no plan is given.
pub fn step_eps(
    family: &Family,
    schedule: &dyn WeightSchedule,
    plan: Option<&dyn Perturbation>,
    state: &IterationState,
    eps: f64,
) -> Result<IterationState> {
    check_eps(eps)?;
    vector_dims(family.dim(), &state.x)?;
    let w = schedule.weights(state.k)?;
    let mut next = Vector::from_raw(weighted_average(family, &w, state.x.as_slice(), Some(eps))?);
    if let Some(p) = plan {
        next = add_vectors(&next, &p.vector(state.k, state.x.dim()))?;
    }
    Ok(state.advanced(next, &w))
}

/// Termination criteria, combined with OR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopRule {
    pub max_iters: u64,
    /// Stop once `||x^{k+1} - x^k|| < tol` for `window` consecutive steps.
    pub displacement: Option<(f64, u32)>,
    /// Stop once every watched distance is at most this tolerance.
    pub feasibility: Option<f64>,
}

impl StopRule {
    pub fn max_iters(n: u64) -> Self {
        StopRule { max_iters: n, displacement: None, feasibility: None }
    }

    pub fn with_displacement(mut self, tol: f64, window: u32) -> Self {
        self.displacement = Some((tol, window));
        self
    }

    pub fn with_feasibility(mut self, tol: f64) -> Self {
        self.feasibility = Some(tol);
        self
    }

    fn validate(&self, watch: &[usize]) -> Result<()> {
        if let Some((tol, window)) = self.displacement {
            if !(tol > 0.0 && tol.is_finite()) || window == 0 {
                return Err(Error::InvalidParameter(format!(
                    "displacement rule needs a positive tolerance and window, got ({tol}, {window})"
                )));
            }
        }
        if let Some(tol) = self.feasibility {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(Error::InvalidParameter(format!("feasibility tolerance must be nonnegative, got {tol}")));
            }
            if watch.is_empty() {
                return Err(Error::InvalidParameter("feasibility rule needs a nonempty watch list".into()));
            }
        }
        Ok(())
    }
}

/// What a run records.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    /// Indices whose distances are recorded.
    pub watch: Vec<usize>,
    /// Indices whose running weight sums are tracked.
    pub tracked: Vec<usize>,
    /// Record only steps with `k % thin == 0`.
    pub thin: u64,
    /// Whether records include `x^k`.
    pub record_points: bool,
}

impl RunOptions {
    /// Watches every set of a finite family, and nothing for an infinite
    /// one.
    pub fn for_family(family: &Family) -> Self {
        let watch = default_watch(family);
        RunOptions { tracked: watch.clone(), watch, thin: 1, record_points: true }
    }

    pub fn watching(watch: Vec<usize>) -> Self {
        RunOptions { tracked: watch.clone(), watch, thin: 1, record_points: true }
    }

    fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thinning interval must be at least 1".into()));
        }
        if self.watch.contains(&0) || self.tracked.contains(&0) {
            return Err(Error::UnresolvableIndex(0));
        }
        Ok(())
    }
}

/// `1..=K` for a finite family of `K` sets; empty for infinite families.
pub fn default_watch(family: &Family) -> Vec<usize> {
    match family.kind() {
        FamilyKind::Finite => (1..=family.head_len()).collect(),
        FamilyKind::Infinite => Vec::new(),
    }
}

/// `d(x, C_i)` for each index in `watch`.
pub fn watch_distances(family: &Family, watch: &[usize], x: &Vector) -> Result<Vec<f64>> {
    vector_dims(family.dim(), x)?;
    watch.iter().map(|&i| Ok(family.get(i)?.distance_slice(x.as_slice()))).collect()
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// Running total of perturbation norms checked against the declared bound.
struct BoundGuard {
    total: f64,
    limit: f64,
}

impl BoundGuard {
    fn new(plan: &PerturbationPlan) -> Self {
        let limit = match plan {
            PerturbationPlan::None => f64::INFINITY,
            PerturbationPlan::Additive(p) => p.bound(),
            PerturbationPlan::Steering(s) => s.step_bound() * s.direction_bound(),
        };
        BoundGuard { total: 0.0, limit }
    }

    /// Adds one norm; false once the total exceeds the bound.
    fn admit(&mut self, norm: f64) -> bool {
        self.total += norm;
        self.total <= self.limit * (1.0 + 1e-12)
    }
}

/// Shared per-run loop state.
struct Runner<'a> {
    family: &'a Family,
    mode: Mode,
    plan: &'a PerturbationPlan,
    options: &'a RunOptions,
    guard: BoundGuard,
    records: Vec<StepRecord>,
}

enum StepOutcome {
    Advanced { step_norm: f64 },
    Stopped(StopReason),
}

impl Runner<'_> {
    /// Performs the step from `state` using `w`, with `plan_k` as the
    /// iteration number seen by the plan, and records it.
    fn step(&mut self, state: &mut IterationState, w: &WeightFunction, plan_k: u64, distances: Vec<f64>) -> Result<StepOutcome> {
        let u = update(self.family, w, self.mode, self.plan, plan_k, &state.x)?;
        if !u.x.is_finite() || !u.perturbation_norm.is_finite() {
            return Ok(StepOutcome::Stopped(StopReason::NonFinite { k: state.k }));
        }
        if !self.guard.admit(u.perturbation_norm) {
            return Ok(StepOutcome::Stopped(StopReason::PerturbationBoundExceeded { k: state.k }));
        }
        let step_norm = math::dist(u.x.as_slice(), state.x.as_slice());
        if state.k.is_multiple_of(self.options.thin) {
            self.records.push(StepRecord {
                k: state.k,
                x: self.options.record_points.then(|| state.x.clone()),
                step_norm,
                distances,
                weights: WeightSummary::of(w),
                perturbation_norm: u.perturbation_norm,
            });
        }
        *state = state.advanced(u.x, w);
        Ok(StepOutcome::Advanced { step_norm })
    }
}

/// Iterates from `x0` until `stop` fires.
///
/// Setup problems (dimension mismatch, a plan that does not fit the mode,
/// invalid options) and family or schedule failures are errors. A
/// non-finite iterate or a perturbation total above the declared bound ends
/// the run early with the corresponding [`StopReason`].
pub fn run(
    family: &Family,
    schedule: &dyn WeightSchedule,
    mode: Mode,
    plan: &PerturbationPlan,
    x0: &Vector,
    stop: StopRule,
    options: &RunOptions,
) -> Result<Trace> {
    vector_dims(family.dim(), x0)?;
    if !x0.is_finite() {
        return Err(Error::NonFinite("initial point"));
    }
    mode.check_plan(plan)?;
    options.validate()?;
    stop.validate(&options.watch)?;

    let mut runner =
        Runner { family, mode, plan, options, guard: BoundGuard::new(plan), records: Vec::new() };
    let mut state = IterationState::tracking(x0.clone(), &options.tracked);
    let mut quiet_steps = 0u32;
    let reason = loop {
        let distances = watch_distances(family, &options.watch, &state.x)?;
        if stop.feasibility.is_some_and(|tol| max_of(&distances) <= tol) {
            break StopReason::Feasible;
        }
        if state.k >= stop.max_iters {
            break StopReason::MaxIters;
        }
        let w = schedule.weights(state.k)?;
        let plan_k = state.k;
        match runner.step(&mut state, &w, plan_k, distances)? {
            StepOutcome::Stopped(reason) => break reason,
            StepOutcome::Advanced { step_norm } => {
                if let Some((tol, window)) = stop.displacement {
                    if step_norm < tol {
                        quiet_steps += 1;
                        if quiet_steps >= window {
                            break StopReason::Displacement;
                        }
                    } else {
                        quiet_steps = 0;
                    }
                }
            }
        }
    };

    let final_distances = watch_distances(family, &options.watch, &state.x)?;
    Ok(Trace {
        meta: RunMeta {
            mode: mode.label().into(),
            schedule: schedule.describe(),
            family: family.describe(),
            plan: plan.describe(),
            eps: mode.eps(),
            watch: options.watch.clone(),
            thin: options.thin,
        },
        records: runner.records,
        stages: Vec::new(),
        stop: reason,
        final_k: state.k,
        final_x: state.x,
        final_distances,
        cumulative: state.cumulative,
        perturbation_total: runner.guard.total,
    })
}

/// One stage of [`run_staged_eps`]: reach `max_{i <= m} d(y, C_i) <= 1/n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stage {
    pub m: usize,
    pub n: u64,
}

impl Stage {
    /// Threshold used during the stage, `1 / (2n)`.
    pub fn eps(&self) -> f64 {
        0.5 / self.n as f64
    }

    pub fn target(&self) -> f64 {
        1.0 / self.n as f64
    }
}

fn validate_stages(stages: &[Stage]) -> Result<()> {
    if stages.is_empty() {
        return Err(Error::InvalidParameter("at least one stage is required".into()));
    }
    if stages.iter().any(|s| s.m == 0 || s.n == 0) {
        return Err(Error::InvalidParameter("stage parameters m and N must be positive".into()));
    }
    for pair in stages.windows(2) {
        if pair[1].m <= pair[0].m || pair[1].n <= pair[0].n {
            return Err(Error::InvalidParameter(format!(
                "stages must increase strictly in m and N: ({}, {}) then ({}, {})",
                pair[0].m, pair[0].n, pair[1].m, pair[1].n
            )));
        }
    }
    Ok(())
}

/// Builds the weight schedule of each stage. The schedule of every stage is
/// evaluated from its own `k = 0`.
pub type ScheduleFactory<'a> = dyn Fn(&Stage) -> Result<Box<dyn WeightSchedule>> + 'a;

/// Staged thresholded iteration.
///
/// Stage `s` runs `step_eps` with `eps = 1/(2N_s)` from the output of the
/// previous stage until `max_{i <= m_s} d(y, C_i) <= 1/N_s`, checked before
/// every step. The plan, if any, sees the global iteration number so that
/// one summable sequence of perturbations spans all stages. A stage that
/// needs more than `cap` steps ends the run with
/// [`StopReason::StageCapExceeded`] and a partial trace.
pub fn run_staged_eps(
    family: &Family,
    factory: &ScheduleFactory<'_>,
    plan: &PerturbationPlan,
    y0: &Vector,
    stages: &[Stage],
    cap: u64,
    options: &RunOptions,
) -> Result<Trace> {
    vector_dims(family.dim(), y0)?;
    if !y0.is_finite() {
        return Err(Error::NonFinite("initial point"));
    }
    validate_stages(stages)?;
    if cap == 0 {
        return Err(Error::InvalidParameter("stage cap must be at least 1".into()));
    }
    Mode::Eps(stages[0].eps()).check_plan(plan)?;
    options.validate()?;

    let mut runner = Runner {
        family,
        mode: Mode::Eps(stages[0].eps()),
        plan,
        options,
        guard: BoundGuard::new(plan),
        records: Vec::new(),
    };
    let mut state = IterationState::tracking(y0.clone(), &options.tracked);
    let mut markers = Vec::with_capacity(stages.len());
    let mut descriptions = Vec::with_capacity(stages.len());
    let mut reason = StopReason::Completed;

    'stages: for (s, stage) in stages.iter().enumerate() {
        let schedule = factory(stage)?;
        descriptions.push(schedule.describe());
        runner.mode = Mode::Eps(stage.eps());
        let targets: Vec<usize> = (1..=stage.m).collect();
        let start_k = state.k;
        let mut local_k = 0u64;
        loop {
            let reached = max_of(&watch_distances(family, &targets, &state.x)?);
            if reached <= stage.target() {
                markers.push(StageMarker {
                    stage: s,
                    m: stage.m,
                    n: stage.n,
                    eps: stage.eps(),
                    start_k,
                    end_k: state.k,
                    max_distance: reached,
                    completed: true,
                });
                break;
            }
            if local_k >= cap {
                markers.push(StageMarker {
                    stage: s,
                    m: stage.m,
                    n: stage.n,
                    eps: stage.eps(),
                    start_k,
                    end_k: state.k,
                    max_distance: reached,
                    completed: false,
                });
                reason = StopReason::StageCapExceeded { stage: s };
                break 'stages;
            }
            let distances = watch_distances(family, &options.watch, &state.x)?;
            let w = schedule.weights(local_k)?;
            let plan_k = state.k;
            if let StepOutcome::Stopped(r) = runner.step(&mut state, &w, plan_k, distances)? {
                reason = r;
                break 'stages;
            }
            local_k += 1;
        }
    }

    let final_distances = watch_distances(family, &options.watch, &state.x)?;
    let mut schedule_label = String::from("staged[");
    for (n, d) in descriptions.iter().enumerate() {
        if n > 0 {
            schedule_label.push_str("; ");
        }
        schedule_label.push_str(d);
    }
    schedule_label.push(']');
    Ok(Trace {
        meta: RunMeta {
            mode: "staged_eps".into(),
            schedule: schedule_label,
            family: family.describe(),
            plan: plan.describe(),
            eps: markers.last().map(|m| m.eps),
            watch: options.watch.clone(),
            thin: options.thin,
        },
        records: runner.records,
        stages: markers,
        stop: reason,
        final_k: state.k,
        final_x: state.x,
        final_distances,
        cumulative: state.cumulative,
        perturbation_total: runner.guard.total,
    })
}
