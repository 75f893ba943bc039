use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::Vector;
use crate::weights::WeightFunction;

/// Compact description of the weight function used at one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightSummary {
    /// Number of index vectors with positive weight.
    pub support: usize,
    pub max_length: usize,
    pub min_weight: f64,
}

impl WeightSummary {
    pub fn of(w: &WeightFunction) -> Self {
        WeightSummary { support: w.len(), max_length: w.max_length(), min_weight: w.min_weight() }
    }
}

/// One iteration `x^k -> x^{k+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub k: u64,
    /// `x^k`, present unless iterates are not being recorded.
    pub x: Option<Vector>,
    /// `||x^{k+1} - x^k||`.
    pub step_norm: f64,
    /// `d(x^k, C_i)` for each watched index.
    pub distances: Vec<f64>,
    pub weights: WeightSummary,
    /// `||v^k||`, or `|beta_k| ||u^k||` when steering; zero otherwise.
    pub perturbation_norm: f64,
}

/// Boundary information for one stage of a staged run.
#[derive(Clone, Debug, PartialEq)]
pub struct StageMarker {
    /// Zero-based stage number.
    pub stage: usize,
    pub m: usize,
    pub n: u64,
    pub eps: f64,
    /// Global iteration number at which the stage started.
    pub start_k: u64,
    /// Global iteration number at which the stage ended.
    pub end_k: u64,
    /// `max_{i <= m} d(y, C_i)` at the end of the stage.
    pub max_distance: f64,
    pub completed: bool,
}

/// Why a run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    MaxIters,
    /// The displacement rule fired.
    Displacement,
    /// Every watched distance fell to the feasibility tolerance.
    Feasible,
    /// The update at iteration `k` produced a non-finite coordinate; the
    /// final point is the last finite iterate.
    NonFinite { k: u64 },
    /// The running sum of perturbation norms exceeded the declared bound.
    PerturbationBoundExceeded { k: u64 },
    /// A staged run hit its per-stage iteration cap. This is inconclusive:
    /// the stage may still succeed with more iterations.
    StageCapExceeded { stage: usize },
    /// Every stage of a staged run reached its target.
    Completed,
}

impl StopReason {
    pub fn is_abort(&self) -> bool {
        matches!(
            self,
            StopReason::NonFinite { .. } | StopReason::PerturbationBoundExceeded { .. } | StopReason::StageCapExceeded { .. }
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            StopReason::MaxIters => "max_iters",
            StopReason::Displacement => "displacement",
            StopReason::Feasible => "feasible",
            StopReason::NonFinite { .. } => "non_finite",
            StopReason::PerturbationBoundExceeded { .. } => "perturbation_bound_exceeded",
            StopReason::StageCapExceeded { .. } => "stage_cap_exceeded",
            StopReason::Completed => "completed",
        }
    }
}

/// Descriptive metadata of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMeta {
    pub mode: String,
    pub schedule: String,
    pub family: String,
    pub plan: String,
    pub eps: Option<f64>,
    pub watch: Vec<usize>,
    pub thin: u64,
}

/// Everything a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub meta: RunMeta,
    /// Recorded steps in strictly increasing `k`.
    pub records: Vec<StepRecord>,
    pub stages: Vec<StageMarker>,
    pub stop: StopReason,
    /// Iteration number of the final point.
    pub final_k: u64,
    pub final_x: Vector,
    /// Watched distances at the final point.
    pub final_distances: Vec<f64>,
    /// Running weight sums of the tracked indices.
    pub cumulative: BTreeMap<usize, f64>,
    /// Sum of the recorded perturbation norms.
    pub perturbation_total: f64,
}

impl Trace {
    pub fn max_final_distance(&self) -> f64 {
        self.final_distances.iter().copied().fold(0.0, f64::max)
    }

    /// Recorded iterates followed by the final point. Consecutive only when
    /// the trace is unthinned and records iterates.
    pub fn iterates(&self) -> Vec<&Vector> {
        let mut xs: Vec<&Vector> = self.records.iter().filter_map(|r| r.x.as_ref()).collect();
        xs.push(&self.final_x);
        xs
    }
}
