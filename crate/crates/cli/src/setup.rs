//! Turning a validated configuration into library objects.

use std::sync::Arc;

use saproj_core::engine::{
    self, GeometricPerturbation, GeometricSuperiorizer, Mode, PerturbationPlan, RunOptions, Stage, SteeringTarget,
    StopRule, Trace, DEFAULT_STAGE_CAP,
};
use saproj_core::families::{self, DescendingChain, RaySchedule, ThetaSequence};
use saproj_core::weights::{
    derive_seed, CimminoGrowing, CyclicBlock, CyclicFinite, KaczmarzGrowing, OddEven, Permutation, TableSchedule,
    TailRule, WeightFunction,
};
use saproj_core::{ConvexSet, Family, IndexVector, Vector, WeightSchedule};

use crate::config::{
    BlockSpec, ExperimentConfig, FamilySpec, ModeKind, PermutationSpec, PlanSpec, ScheduleSpec, SetSpec, TailSpec,
};

/// Sub-seed stream of schedule permutations.
pub const SCHEDULE_STREAM: u64 = 1;
/// Sub-seed stream of the perturbation plan.
pub const PLAN_STREAM: u64 = 2;

/// Angle data of the rays counterexample, kept for the trace metadata.
#[derive(Clone, Debug)]
pub struct RaysData {
    pub theta: ThetaSequence,
    pub alpha: Vec<usize>,
    pub schedule: RaySchedule,
}

/// A configuration with every library object built.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub family: Family,
    pub rays: Option<RaysData>,
    pub x0: Vector,
    pub plan: PerturbationPlan,
    pub options: RunOptions,
}

impl Experiment {
    /// Builds every object. The configuration must already be valid.
    pub fn build(config: &ExperimentConfig) -> saproj_core::Result<Self> {
        let (family, rays, default_x0) = build_family(&config.family)?;
        let x0 = match &config.x0 {
            Some(x) => Vector::from_slice(x)?,
            None => default_x0.ok_or(saproj_core::Error::InvalidParameter("a starting point is required".into()))?,
        };
        let plan = build_plan(&config.plan, config.seed)?;
        let watch = config.watch.clone().unwrap_or_else(|| default_watch(config, &family));
        let options = RunOptions {
            tracked: watch.clone(),
            watch,
            thin: config.output.thin,
            record_points: config.output.record_points,
        };
        Ok(Experiment { config: config.clone(), family, rays, x0, plan, options })
    }

    /// Schedule of the run, or of one stage of a staged run.
    pub fn schedule(&self, stage: Option<&Stage>) -> saproj_core::Result<Box<dyn WeightSchedule>> {
        let perm = |p: PermutationSpec| match p {
            PermutationSpec::Identity => Permutation::Identity,
            PermutationSpec::Seeded => Permutation::Seeded(derive_seed(self.config.seed, SCHEDULE_STREAM)),
        };
        Ok(match &self.config.schedule {
            ScheduleSpec::CimminoGrowing => Box::new(CimminoGrowing),
            ScheduleSpec::KaczmarzGrowing { permutation } => Box::new(KaczmarzGrowing { permutation: perm(*permutation) }),
            ScheduleSpec::OddEven { permutation } => Box::new(OddEven { permutation: perm(*permutation) }),
            ScheduleSpec::Cyclic { block, size } => {
                let size = size
                    .or(stage.map(|s| s.m))
                    .or(self.config.family.finite_size())
                    .ok_or_else(|| saproj_core::Error::InvalidSchedule("cyclic schedule needs a size".into()))?;
                let block = match block {
                    BlockSpec::Single => CyclicBlock::SingleIndex,
                    BlockSpec::Cimmino => CyclicBlock::FullCimmino,
                    BlockSpec::Kaczmarz => CyclicBlock::FullKaczmarz,
                };
                Box::new(CyclicFinite::new(size, block)?)
            }
            ScheduleSpec::Table { rows, tail } => {
                let rows = rows
                    .iter()
                    .map(|row| {
                        let pairs = row
                            .iter()
                            .map(|e| Ok((IndexVector::from_slice(&e.indices)?, e.weight)))
                            .collect::<saproj_core::Result<Vec<_>>>()?;
                        WeightFunction::new(pairs)
                    })
                    .collect::<saproj_core::Result<Vec<_>>>()?;
                let tail = match tail {
                    TailSpec::RepeatLast => TailRule::RepeatLast,
                    TailSpec::Cycle => TailRule::Cycle,
                    TailSpec::Exhausted => TailRule::Exhausted,
                };
                Box::new(TableSchedule::new(rows, tail)?)
            }
            ScheduleSpec::RaysNatural => match &self.rays {
                Some(r) => Box::new(r.schedule.clone()),
                None => {
                    return Err(saproj_core::Error::InvalidSchedule("rays_natural needs the rays family".into()));
                }
            },
        })
    }

    pub fn stages(&self) -> Vec<Stage> {
        self.config.stages.iter().map(|s| Stage { m: s.m, n: s.n }).collect()
    }

    pub fn stop_rule(&self) -> StopRule {
        let s = &self.config.stop;
        let mut rule = StopRule::max_iters(s.max_iters.unwrap_or(0));
        if let Some(tol) = s.displacement_tol {
            rule = rule.with_displacement(tol, s.displacement_window.unwrap_or(1));
        }
        if let Some(tol) = s.feasibility_tol {
            rule = rule.with_feasibility(tol);
        }
        rule
    }

    /// Runs the configured iteration.
    pub fn run(&self) -> saproj_core::Result<Trace> {
        self.run_with(&self.options)
    }

    pub fn run_with(&self, options: &RunOptions) -> saproj_core::Result<Trace> {
        let mode = match self.config.mode {
            ModeKind::Plain => Mode::Plain,
            ModeKind::Perturbed => Mode::Perturbed,
            ModeKind::Superiorized => Mode::Superiorized,
            ModeKind::Eps => Mode::Eps(self.config.eps.unwrap_or(0.0)),
            ModeKind::StagedEps => {
                let factory = |stage: &Stage| self.schedule(Some(stage));
                let cap = self.config.stage_cap.unwrap_or(DEFAULT_STAGE_CAP);
                return engine::run_staged_eps(&self.family, &factory, &self.plan, &self.x0, &self.stages(), cap, options);
            }
        };
        let schedule = self.schedule(None)?;
        engine::run(&self.family, schedule.as_ref(), mode, &self.plan, &self.x0, self.stop_rule(), options)
    }
}

fn default_watch(config: &ExperimentConfig, family: &Family) -> Vec<usize> {
    if let Some(last) = config.stages.last() {
        return (1..=last.m).collect();
    }
    match &config.family {
        FamilySpec::RaysCounterexample { .. } => vec![1],
        FamilySpec::LinearSystem { .. } | FamilySpec::Sets { .. } => engine::default_watch(family),
        FamilySpec::DescendingChain { .. } | FamilySpec::Triangles => (1..=family.head_len() + 1).collect(),
    }
}

pub fn build_set(spec: &SetSpec) -> saproj_core::Result<ConvexSet> {
    match spec {
        SetSpec::Halfspace { normal, offset } => ConvexSet::halfspace(Vector::from_slice(normal)?, *offset),
        SetSpec::Hyperplane { normal, offset } => ConvexSet::hyperplane(Vector::from_slice(normal)?, *offset),
        SetSpec::Ball { center, radius } => ConvexSet::ball(Vector::from_slice(center)?, *radius),
        SetSpec::Box { lo, hi } => ConvexSet::box_set(Vector::from_slice(lo)?, Vector::from_slice(hi)?),
        SetSpec::Ray { theta } => ConvexSet::ray2d(*theta),
        SetSpec::Triangle { vertices } => ConvexSet::triangle2d(vertices[0], vertices[1], vertices[2]),
        SetSpec::WholeSpace { .. } => Ok(ConvexSet::whole_space()),
    }
}

type BuiltFamily = (Family, Option<RaysData>, Option<Vector>);

fn build_family(spec: &FamilySpec) -> saproj_core::Result<BuiltFamily> {
    Ok(match spec {
        FamilySpec::LinearSystem { matrix, rhs } => (families::family_linear_system(matrix, rhs)?, None, None),
        FamilySpec::Sets { sets } => {
            let dim = spec.dim().unwrap_or(0);
            let sets = sets.iter().map(build_set).collect::<saproj_core::Result<Vec<_>>>()?;
            (Family::finite(dim, sets)?, None, None)
        }
        FamilySpec::DescendingChain { dim, center, base, decay, head } => {
            let center = match center {
                Some(c) => Vector::from_slice(c)?,
                None => Vector::zeros(*dim),
            };
            let (base, decay) = (*base, *decay);
            let chain = DescendingChain::new(center, move |i: usize| base + decay / i as f64);
            let head = head.iter().map(build_set).collect::<saproj_core::Result<Vec<_>>>()?;
            (Family::infinite(*dim, head, Arc::new(chain))?, None, None)
        }
        FamilySpec::Triangles => (families::family_triangles(), None, None),
        FamilySpec::RaysCounterexample { prefix_len } => {
            let ce = families::family_rays_counterexample(*prefix_len)?;
            let data = RaysData { theta: ce.theta, alpha: ce.alpha, schedule: ce.schedule };
            (ce.family, Some(data), Some(ce.x0))
        }
    })
}

fn build_plan(spec: &PlanSpec, seed: u64) -> saproj_core::Result<PerturbationPlan> {
    Ok(match spec {
        PlanSpec::None => PerturbationPlan::None,
        PlanSpec::Geometric { scale, ratio } => {
            PerturbationPlan::additive(GeometricPerturbation::new(*scale, *ratio, derive_seed(seed, PLAN_STREAM))?)
        }
        PlanSpec::Steer { scale, ratio, target } => {
            let target = match target {
                Some(t) => SteeringTarget::Point(Vector::from_slice(t)?),
                None => SteeringTarget::MinNorm,
            };
            PerturbationPlan::steering(GeometricSuperiorizer::new(*scale, *ratio, target)?)
        }
    })
}
