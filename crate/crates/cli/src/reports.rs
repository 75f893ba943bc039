//! Hypothesis checks, applicability notes and the printed run summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use saproj_core::analysis::{self, Growth, HypothesisId, HypothesisReport, PartialSum, Verdict};
use saproj_core::engine::{PerturbationPlan, StopReason, Trace};
use saproj_core::geometry::FamilyKind;
use serde::{Deserialize, Serialize};

use crate::config::{CheckSpec, FamilySpec, ModeKind, SCHEMA_VERSION};
use crate::setup::Experiment;

/// A hypothesis report in file form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub id: String,
    /// `holds`, `violated` or `inapplicable`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_measured: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_bound: Option<f64>,
    pub horizon: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    pub detail: String,
    pub text: String,
}

impl From<&HypothesisReport> for ReportEntry {
    fn from(r: &HypothesisReport) -> Self {
        let (status, at, witness) = match &r.verdict {
            Verdict::HoldsOnHorizon => ("holds", None, None),
            Verdict::ViolatedAt { at, witness } => ("violated", Some(*at), Some(witness)),
            Verdict::Inapplicable { .. } => ("inapplicable", None, None),
        };
        ReportEntry {
            id: r.id.label().into(),
            status: status.into(),
            at,
            witness_index: witness.and_then(|w| w.index),
            witness_measured: witness.map(|w| w.measured),
            witness_bound: witness.map(|w| w.bound),
            horizon: r.horizon,
            measured: r.measured,
            detail: r.detail.clone(),
            text: r.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumEntry {
    pub index: usize,
    pub total: f64,
    pub last_decade: f64,
    pub growth: String,
}

/// Contents of `<name>.reports.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportsFile {
    pub schema_version: u32,
    pub reports: Vec<ReportEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub partial_sums: Vec<SumEntry>,
    pub notes: Vec<String>,
}

/// Results of the configured checks.
#[derive(Clone, Debug, Default)]
pub struct CheckResults {
    pub reports: Vec<HypothesisReport>,
    pub partial_sums: BTreeMap<usize, PartialSum>,
}

impl CheckResults {
    pub fn find(&self, id: HypothesisId) -> Option<&HypothesisReport> {
        self.reports.iter().find(|r| r.id == id)
    }

    pub fn to_file(&self, notes: &[String]) -> ReportsFile {
        ReportsFile {
            schema_version: SCHEMA_VERSION,
            reports: self.reports.iter().map(ReportEntry::from).collect(),
            partial_sums: self
                .partial_sums
                .iter()
                .map(|(&index, s)| SumEntry {
                    index,
                    total: s.total,
                    last_decade: s.last_decade,
                    growth: s.growth.label().into(),
                })
                .collect(),
            notes: notes.to_vec(),
        }
    }
}

/// Indices examined by checks that do not list their own.
fn default_indices(exp: &Experiment) -> Vec<usize> {
    if let Some(size) = exp.config.family.finite_size() {
        return (1..=size).collect();
    }
    if let Some(last) = exp.config.stages.last() {
        return (1..=last.m).collect();
    }
    match &exp.config.family {
        FamilySpec::RaysCounterexample { .. } => (1..=exp.family.head_len()).collect(),
        _ => exp.options.watch.clone(),
    }
}

/// Evaluates every configured check. Staged runs are checked against the
/// schedule of their last stage.
pub fn run_checks(exp: &Experiment) -> saproj_core::Result<CheckResults> {
    let stage = exp.stages().last().copied();
    let schedule = exp.schedule(stage.as_ref())?;
    let schedule = schedule.as_ref();
    let mut out = CheckResults::default();
    for check in &exp.config.checks {
        match check {
            CheckSpec::C1 { r_max, kappa, f } => {
                out.reports.push(analysis::check_c1(schedule, &|r| f.eval(r), &|r| kappa.eval(r), *r_max)?);
            }
            CheckSpec::C2 { r_min, r_max, kappa, f, indices } => {
                let window = match r_min {
                    Some(lo) => (*lo, *r_max),
                    None => analysis::default_c2_window(*r_max),
                };
                let indices = indices.clone().unwrap_or_else(|| default_indices(exp));
                out.reports.push(analysis::check_c2(
                    schedule,
                    &exp.family,
                    &|r| f.eval(r),
                    &|r| kappa.eval(r),
                    &indices,
                    window,
                )?);
            }
            CheckSpec::H123 { k_max } => {
                let size = exp.config.family.finite_size().unwrap_or(0);
                let h = analysis::check_h123(schedule, size, *k_max)?;
                out.reports.extend([h.h1, h.h2, h.h3]);
            }
            CheckSpec::DivergentSums { k_max, indices } => {
                let indices = indices.clone().unwrap_or_else(|| default_indices(exp));
                let sums = analysis::check_divergent_sums(schedule, &indices, *k_max)?;
                out.reports.push(analysis::divergent_sums_report(&sums, *k_max));
                out.partial_sums.extend(sums);
            }
            CheckSpec::Uasc => out.reports.push(analysis::check_uasc_finite(&exp.family)),
        }
    }
    Ok(out)
}

fn holds(results: &CheckResults, id: HypothesisId) -> Option<bool> {
    results.find(id).map(HypothesisReport::holds)
}

/// Which convergence results the checked hypotheses support.
pub fn applicability_notes(exp: &Experiment, results: &CheckResults) -> Vec<String> {
    let mut notes = Vec::new();
    let finite = exp.family.kind() == FamilyKind::Finite;
    let divergent = holds(results, HypothesisId::DivergentSum);
    let c1c2 = match (holds(results, HypothesisId::C1), holds(results, HypothesisId::C2)) {
        (Some(a), Some(b)) => Some(a && b),
        _ => None,
    };

    if finite {
        notes.push(match divergent {
            Some(true) => "finite family, so every union of subcollections is closed; every weight sum looks divergent, \
                           so the iterates converge to a point of the intersection (assuming it is nonempty)"
                .into(),
            Some(false) => "finite family: the iterates converge, but only sets whose weight sums diverge are \
                            guaranteed to contain the limit; some sums look convergent"
                .into(),
            None => "finite family: the iterates converge, and the limit lies in every set whose weight sum diverges \
                     (add a divergent_sums check to see which)"
                .into(),
        });
    } else {
        notes.push(
            "infinite family: divergent weight sums alone do not force convergence; it follows when the \
             intersection is full-dimensional (not checked here) or when C1 and C2 hold"
                .into(),
        );
        if divergent == Some(true) {
            notes.push(
                "weight sums look divergent, which yields convergence only together with a full-dimensional \
                 intersection or closed unions of subcollections"
                    .into(),
            );
        }
    }
    match c1c2 {
        Some(true) => notes.push(
            "C1 and C2 hold on the checked blocks: if they persist and sum f_r diverges, the iterates converge to \
             a point of the intersection"
                .into(),
        ),
        Some(false) => notes.push("C1 or C2 fails on the checked blocks; the block-condition result gives no conclusion".into()),
        None => {}
    }
    let h123 = [HypothesisId::H1, HypothesisId::H2, HypothesisId::H3].map(|id| holds(results, id));
    if h123.iter().all(|h| *h == Some(true)) {
        notes.push("H1-H3 hold on the horizon, so the classical finite-case convergence result also applies".into());
    }

    match (&exp.config.mode, &exp.plan) {
        (ModeKind::Perturbed, PerturbationPlan::Additive(p)) => notes.push(format!(
            "perturbations are summable (declared bound {}); the conclusions above carry over to the perturbed iterates",
            p.bound()
        )),
        (ModeKind::Superiorized, PerturbationPlan::Steering(s)) => notes.push(format!(
            "steering steps satisfy sum |beta_k| <= {} and ||u^k|| <= {}, so they act as summable perturbations and \
             the conclusions above carry over",
            s.step_bound(),
            s.direction_bound()
        )),
        (ModeKind::Eps, _) => notes.push(
            "thresholded projections skip sets closer than eps, so the run approaches each targeted set only to \
             within about eps"
                .into(),
        ),
        (ModeKind::StagedEps, _) => notes.push(
            "staged run: each completed stage ends within 1/N of C_1..C_m, giving a sequence that approaches every \
             set of the family"
                .into(),
        ),
        _ => {}
    }
    notes
}

/// Spread of the last 10% of the recorded iterates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Oscillation {
    /// Number of iterates examined.
    pub window: usize,
    /// Largest minus smallest polar angle, unwrapped (planar runs only).
    pub angular_diameter: Option<f64>,
    /// Diagonal of the bounding box of the iterates.
    pub spread: f64,
}

pub fn oscillation(trace: &Trace) -> Option<Oscillation> {
    let xs = trace.iterates();
    if xs.len() < 2 {
        return None;
    }
    let window = (xs.len() / 10).max(2);
    let tail = &xs[xs.len() - window..];
    let dim = tail[0].dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for x in tail {
        for (j, &c) in x.as_slice().iter().enumerate() {
            lo[j] = lo[j].min(c);
            hi[j] = hi[j].max(c);
        }
    }
    let spread = lo.iter().zip(&hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt();
    let angular_diameter = (dim == 2).then(|| {
        let mut angle = tail[0].as_slice()[1].atan2(tail[0].as_slice()[0]);
        let (mut min, mut max) = (angle, angle);
        for pair in tail.windows(2) {
            let a = pair[0].as_slice();
            let b = pair[1].as_slice();
            let mut delta = b[1].atan2(b[0]) - a[1].atan2(a[0]);
            delta -= (delta / std::f64::consts::TAU).round() * std::f64::consts::TAU;
            angle += delta;
            min = min.min(angle);
            max = max.max(angle);
        }
        max - min
    });
    Some(Oscillation { window, angular_diameter, spread })
}

fn stop_text(stop: &StopReason) -> String {
    match stop {
        StopReason::NonFinite { k } => format!("non_finite (update at k = {k} left the finite range)"),
        StopReason::PerturbationBoundExceeded { k } => {
            format!("perturbation_bound_exceeded (at k = {k} the perturbation total passed the declared bound)")
        }
        StopReason::StageCapExceeded { stage } => {
            format!("stage_cap_exceeded (stage {stage} hit its iteration cap; inconclusive)")
        }
        other => other.label().into(),
    }
}

fn short_vector(x: &[f64]) -> String {
    let shown: Vec<String> = x.iter().take(6).map(|c| format!("{c:.6e}")).collect();
    if x.len() > 6 {
        format!("[{}, ... ({} coordinates)]", shown.join(", "), x.len())
    } else {
        format!("[{}]", shown.join(", "))
    }
}

/// One-screen summary of a finished run.
pub fn summary(name: &str, trace: &Trace, results: &CheckResults, notes: &[String]) -> String {
    let mut s = String::new();
    let m = &trace.meta;
    let _ = writeln!(s, "run {name}: mode {}, {} iterations", m.mode, trace.final_k);
    let _ = writeln!(s, "  family:   {}", m.family);
    let _ = writeln!(s, "  schedule: {}", m.schedule);
    let _ = writeln!(s, "  plan:     {}", m.plan);
    let _ = writeln!(s, "stop: {}", stop_text(&trace.stop));
    if !m.watch.is_empty() {
        let _ = writeln!(s, "max watched distance at the end: {:.6e} (watching {} sets)", trace.max_final_distance(), m.watch.len());
    }
    let _ = writeln!(s, "final point: {}", short_vector(trace.final_x.as_slice()));
    if trace.perturbation_total > 0.0 {
        let _ = writeln!(s, "perturbation total: {:.6e}", trace.perturbation_total);
    }
    for st in &trace.stages {
        let _ = writeln!(
            s,
            "stage {} (m = {}, N = {}): k {}..{}, max distance {:.3e}{}",
            st.stage,
            st.m,
            st.n,
            st.start_k,
            st.end_k,
            st.max_distance,
            if st.completed { "" } else { " (not completed)" }
        );
    }
    match oscillation(trace) {
        Some(o) => {
            let _ = write!(s, "oscillation over the last {} iterates: spread {:.3e}", o.window, o.spread);
            if let Some(a) = o.angular_diameter {
                let _ = write!(s, ", angular diameter {a:.4} rad");
            }
            s.push('\n');
        }
        None => s.push_str("oscillation: not available (iterates not recorded)\n"),
    }
    for r in &results.reports {
        let _ = writeln!(s, "check {r}");
    }
    let undetermined = results.partial_sums.values().filter(|p| p.growth == Growth::Undetermined).count();
    if undetermined > 0 {
        let _ = writeln!(s, "  {undetermined} partial sums undetermined on this horizon");
    }
    for n in notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}
