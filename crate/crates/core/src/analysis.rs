//! Finite-horizon checks of the sufficient conditions on weight schedules,
//! and monitors for the inequalities that iterates must satisfy.
//!
//! The conditions are asymptotic, so every verdict is relative to the horizon
//! it was computed on: "holds" means no violation was found up to that
//! horizon, and the trend heuristics for H1 and H2 flag schedules whose
//! weights keep shrinking or whose strings keep growing within it.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::Trace;
use crate::geometry::{Family, FamilyKind, Vector};
use crate::math;
use crate::weights::{Support, WeightFunction, WeightSchedule};
use crate::{Error, Result};

/// Relative slack used when comparing computed sums against bounds, so that
/// cases of exact equality survive rounding.
const COMPARISON_SLACK: f64 = 1e-12;

/// Tolerance of the Fejer and descent monitors.
pub const MONITOR_TOLERANCE: f64 = 1e-9;

/// Tolerance of the perturbed distance bound monitor.
pub const PERTURBED_BOUND_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HypothesisId {
    C1,
    C2,
    H1,
    H2,
    H3,
    DivergentSum,
    UascFinite,
}

impl HypothesisId {
    pub fn label(&self) -> &'static str {
        match self {
            HypothesisId::C1 => "C1",
            HypothesisId::C2 => "C2",
            HypothesisId::H1 => "H1",
            HypothesisId::H2 => "H2",
            HypothesisId::H3 => "H3",
            HypothesisId::DivergentSum => "DIVERGENT_SUM",
            HypothesisId::UascFinite => "UASC_FINITE",
        }
    }
}

/// Concrete evidence of a violation.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    /// Set index involved, if any.
    pub index: Option<usize>,
    /// Value that failed the test.
    pub measured: f64,
    /// Bound it was compared against.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// No violation up to the horizon.
    HoldsOnHorizon,
    /// Violated at iteration `k` or block `r`, depending on the hypothesis.
    ViolatedAt { at: u64, witness: Witness },
    Inapplicable { reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport {
    pub id: HypothesisId,
    pub verdict: Verdict,
    /// Last iteration or block number examined.
    pub horizon: u64,
    /// Headline measurement, e.g. the infimum weight for H1.
    pub measured: Option<f64>,
    pub detail: String,
}

impl HypothesisReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::HoldsOnHorizon
    }

    fn new(id: HypothesisId, verdict: Verdict, horizon: u64, measured: Option<f64>, detail: String) -> Self {
        HypothesisReport { id, verdict, horizon, measured, detail }
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.id.label())?;
        match &self.verdict {
            Verdict::HoldsOnHorizon => write!(f, "holds up to {}", self.horizon)?,
            Verdict::ViolatedAt { at, witness } => {
                write!(f, "violated at {at} (measured {}, bound {}", witness.measured, witness.bound)?;
                if let Some(i) = witness.index {
                    write!(f, ", index {i}")?;
                }
                f.write_str(")")?;
            }
            Verdict::Inapplicable { reason } => write!(f, "inapplicable ({reason})")?,
        }
        if !self.detail.is_empty() {
            write!(f, "; {}", self.detail)?;
        }
        Ok(())
    }
}

fn at_least(value: f64, bound: f64) -> bool {
    value >= bound - COMPARISON_SLACK * libm::fabs(bound)
}

fn at_most(value: f64, bound: f64) -> bool {
    value <= bound + COMPARISON_SLACK * libm::fabs(bound)
}

fn kappa_sequence(kappa: &dyn Fn(u64) -> u64, r_max: u64) -> Result<Vec<u64>> {
    // kappa[r] for r = 1..=r_max+1, stored at r - 1.
    let ks: Vec<u64> = (1..=r_max + 1).map(kappa).collect();
    for (r, pair) in ks.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidParameter(format!(
                "kappa must be strictly increasing: kappa_{} = {}, kappa_{} = {}",
                r + 1,
                pair[0],
                r + 2,
                pair[1]
            )));
        }
    }
    Ok(ks)
}

fn check_f(f: f64, r: u64) -> Result<()> {
    if (0.0..=1.0).contains(&f) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("f_{r} = {f} is outside [0, 1]")))
    }
}

/// `sum_{k=kappa_r}^{kappa_{r+1}-2} maxLength(w^k) <= 1/f_r` for every
/// `1 <= r <= r_max` with `kappa_{r+1} >= kappa_r + 2` and `f_r > 0`.
pub fn check_c1(
    schedule: &dyn WeightSchedule,
    f: &dyn Fn(u64) -> f64,
    kappa: &dyn Fn(u64) -> u64,
    r_max: u64,
) -> Result<HypothesisReport> {
    let ks = kappa_sequence(kappa, r_max)?;
    let mut vacuous = 0u64;
    for r in 1..=r_max {
        let fr = f(r);
        check_f(fr, r)?;
        let (lo, hi) = (ks[r as usize - 1], ks[r as usize]);
        if hi < lo + 2 || fr == 0.0 {
            vacuous += 1;
            continue;
        }
        let mut total = 0.0;
        for k in lo..=hi - 2 {
            total += schedule.weights(k)?.max_length() as f64;
        }
        if !at_most(total, 1.0 / fr) {
            return Ok(HypothesisReport::new(
                HypothesisId::C1,
                Verdict::ViolatedAt { at: r, witness: Witness { index: None, measured: total, bound: 1.0 / fr } },
                r_max,
                Some(total),
                String::new(),
            ));
        }
    }
    Ok(HypothesisReport::new(
        HypothesisId::C1,
        Verdict::HoldsOnHorizon,
        r_max,
        None,
        format!("{vacuous} of {r_max} blocks vacuous"),
    ))
}

/// Default block window for [`check_c2`]: the upper half of `1..=r_max`.
pub fn default_c2_window(r_max: u64) -> (u64, u64) {
    ((r_max / 2).max(1), r_max)
}

/// For every tracked `i` with `C_i != R^n` and every `r` in `r_range`:
/// `max_{kappa_r <= k < kappa_{r+1}} sum_{iota ∋ i} w^k(iota)/Position(i, iota) >= f_r`.
pub fn check_c2(
    schedule: &dyn WeightSchedule,
    family: &Family,
    f: &dyn Fn(u64) -> f64,
    kappa: &dyn Fn(u64) -> u64,
    indices: &[usize],
    r_range: (u64, u64),
) -> Result<HypothesisReport> {
    let (r_lo, r_hi) = r_range;
    if r_lo == 0 || r_lo > r_hi {
        return Err(Error::InvalidParameter(format!("invalid block window [{r_lo}, {r_hi}]")));
    }
    let mut tracked = Vec::new();
    for &i in indices {
        if !family.is_whole_space(i)? {
            tracked.push(i);
        }
    }
    tracked.sort_unstable();
    tracked.dedup();
    if tracked.is_empty() {
        return Ok(HypothesisReport::new(
            HypothesisId::C2,
            Verdict::Inapplicable { reason: "no tracked index with a proper set".into() },
            r_hi,
            None,
            String::new(),
        ));
    }
    let ks = kappa_sequence(kappa, r_hi)?;
    let mut worst_margin = f64::INFINITY;
    for r in r_lo..=r_hi {
        let fr = f(r);
        check_f(fr, r)?;
        let mut best = alloc::vec![0.0f64; tracked.len()];
        for k in ks[r as usize - 1]..ks[r as usize] {
            let w = schedule.weights(k)?;
            for (b, &i) in best.iter_mut().zip(&tracked) {
                *b = b.max(w.index_position_sum(i));
            }
        }
        for (&b, &i) in best.iter().zip(&tracked) {
            if !at_least(b, fr) {
                return Ok(HypothesisReport::new(
                    HypothesisId::C2,
                    Verdict::ViolatedAt { at: r, witness: Witness { index: Some(i), measured: b, bound: fr } },
                    r_hi,
                    Some(b),
                    format!("blocks {r_lo}..={r_hi}"),
                ));
            }
            worst_margin = worst_margin.min(b - fr);
        }
    }
    Ok(HypothesisReport::new(
        HypothesisId::C2,
        Verdict::HoldsOnHorizon,
        r_hi,
        Some(worst_margin),
        format!("blocks {r_lo}..={r_hi}, {} indices, smallest margin {worst_margin}", tracked.len()),
    ))
}

/// Reports for H1 (weights bounded below), H2 (string lengths bounded) and
/// H3 (every index used in every window of `s` iterations).
#[derive(Clone, Debug, PartialEq)]
pub struct H123Report {
    pub h1: HypothesisReport,
    pub h2: HypothesisReport,
    pub h3: HypothesisReport,
}

impl H123Report {
    pub fn all_hold(&self) -> bool {
        self.h1.holds() && self.h2.holds() && self.h3.holds()
    }
}

/// Distinct indices of a weight function's support that are at most `size`.
fn used_indices(w: &WeightFunction, size: usize, out: &mut [bool]) {
    out.iter_mut().for_each(|u| *u = false);
    match w.support() {
        Support::Entries(entries) => {
            for (iota, _) in entries {
                for &i in iota.indices() {
                    if i <= size {
                        out[i - 1] = true;
                    }
                }
            }
        }
        Support::UniformSingletons { count, .. } => {
            for u in out.iter_mut().take(count.min(size)) {
                *u = true;
            }
        }
    }
}

/// Measures H1-H3 for a finite family of `size` sets over `0..=k_max`.
///
/// H1 reports the infimum weight and is flagged when the smallest weight in
/// the second half of the horizon is below the smallest in the first half.
/// H2 reports the largest string length and is flagged when the second half
/// uses longer strings than the first. H3 reports the smallest `s` such that
/// every window of `s` consecutive iterations inside the horizon uses every
/// index, and is flagged when an index is never used or `s` exceeds half the
/// horizon.
pub fn check_h123(schedule: &dyn WeightSchedule, size: usize, k_max: u64) -> Result<H123Report> {
    if size == 0 {
        return Err(Error::InvalidParameter("family size must be at least 1".into()));
    }
    let half = k_max / 2;
    let mut first_min_w = f64::INFINITY;
    let mut first_max_len = 0usize;
    let mut inf_w = f64::INFINITY;
    let mut max_len = 0usize;
    let mut h1_violation = None;
    let mut h2_violation = None;
    let mut last_use: Vec<Option<u64>> = alloc::vec![None; size];
    let mut s_needed = alloc::vec![0u64; size];
    let mut gap_end = alloc::vec![0u64; size];
    let mut used = alloc::vec![false; size];

    for k in 0..=k_max {
        let w = schedule.weights(k)?;
        let mw = w.min_weight();
        let ml = w.max_length();
        inf_w = inf_w.min(mw);
        max_len = max_len.max(ml);
        if k <= half {
            first_min_w = first_min_w.min(mw);
            first_max_len = first_max_len.max(ml);
        } else {
            if h1_violation.is_none() && mw < first_min_w {
                h1_violation = Some((k, mw, first_min_w));
            }
            if h2_violation.is_none() && ml > first_max_len {
                h2_violation = Some((k, ml, first_max_len));
            }
        }
        used_indices(&w, size, &mut used);
        for (i, &u) in used.iter().enumerate() {
            if u {
                let run = match last_use[i] {
                    Some(t) => k - t,
                    None => k + 1,
                };
                if run > s_needed[i] {
                    s_needed[i] = run;
                    gap_end[i] = k;
                }
                last_use[i] = Some(k);
            }
        }
    }

    let h1 = match h1_violation {
        Some((k, mw, bound)) => HypothesisReport::new(
            HypothesisId::H1,
            Verdict::ViolatedAt { at: k, witness: Witness { index: None, measured: mw, bound } },
            k_max,
            Some(inf_w),
            "minimum weight keeps decreasing".into(),
        ),
        None => HypothesisReport::new(HypothesisId::H1, Verdict::HoldsOnHorizon, k_max, Some(inf_w), format!("epsilon = {inf_w}")),
    };
    let h2 = match h2_violation {
        Some((k, ml, bound)) => HypothesisReport::new(
            HypothesisId::H2,
            Verdict::ViolatedAt { at: k, witness: Witness { index: None, measured: ml as f64, bound: bound as f64 } },
            k_max,
            Some(max_len as f64),
            "maximum string length keeps increasing".into(),
        ),
        None => HypothesisReport::new(HypothesisId::H2, Verdict::HoldsOnHorizon, k_max, Some(max_len as f64), format!("m = {max_len}")),
    };

    let mut s = 0u64;
    let mut h3_violation = None;
    for i in 0..size {
        let Some(t) = last_use[i] else {
            h3_violation.get_or_insert((k_max, i + 1, f64::INFINITY));
            continue;
        };
        // The window starting right after the last use must not fit.
        let tail = k_max - t + 1;
        if tail > s_needed[i] {
            s_needed[i] = tail;
            gap_end[i] = k_max;
        }
        if s_needed[i] > s {
            s = s_needed[i];
        }
    }
    let limit = k_max.div_ceil(2);
    if h3_violation.is_none() && s > limit {
        let i = (0..size).max_by_key(|&i| (s_needed[i], core::cmp::Reverse(i))).expect("size >= 1");
        h3_violation = Some((gap_end[i], i + 1, s as f64));
    }
    let h3 = match h3_violation {
        Some((at, i, measured)) => HypothesisReport::new(
            HypothesisId::H3,
            Verdict::ViolatedAt { at, witness: Witness { index: Some(i), measured, bound: limit as f64 } },
            k_max,
            Some(s as f64),
            if measured.is_infinite() { format!("index {i} is never used") } else { format!("index {i} unused for {measured} iterations") },
        ),
        None => HypothesisReport::new(HypothesisId::H3, Verdict::HoldsOnHorizon, k_max, Some(s as f64), format!("s = {s}")),
    };
    Ok(H123Report { h1, h2, h3 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Growth {
    ApparentlyDivergent,
    ApparentlyConvergent,
    Undetermined,
}

impl Growth {
    pub fn label(&self) -> &'static str {
        match self {
            Growth::ApparentlyDivergent => "apparently-divergent",
            Growth::ApparentlyConvergent => "apparently-convergent",
            Growth::Undetermined => "undetermined",
        }
    }
}

/// Thresholds of [`classify_growth`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthThresholds {
    /// A divergent-looking sum must exceed this.
    pub large_sum: f64,
    /// ...and still grow by more than this over the last decade.
    pub growing: f64,
    /// A convergent-looking sum grows by less than this over the last decade.
    pub settled: f64,
}

impl Default for GrowthThresholds {
    fn default() -> Self {
        GrowthThresholds { large_sum: 10.0, growing: 0.1, settled: 1e-6 }
    }
}

pub fn classify_growth(total: f64, last_decade: f64, t: GrowthThresholds) -> Growth {
    if total > t.large_sum && last_decade > t.growing {
        Growth::ApparentlyDivergent
    } else if last_decade < t.settled {
        Growth::ApparentlyConvergent
    } else {
        Growth::Undetermined
    }
}

/// Partial weight sum of one index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartialSum {
    /// `sum_{k <= k_max} index_weight_sum(w^k, i)`.
    pub total: f64,
    /// Contribution of `k_max/10 < k <= k_max`.
    pub last_decade: f64,
    pub growth: Growth,
}

/// Partial sums of `sum_k sum_{iota ∋ i} w^k(iota)` up to `k_max`, classified
/// with the default [`GrowthThresholds`].
pub fn check_divergent_sums(schedule: &dyn WeightSchedule, indices: &[usize], k_max: u64) -> Result<BTreeMap<usize, PartialSum>> {
    check_divergent_sums_with(schedule, indices, k_max, GrowthThresholds::default())
}

pub fn check_divergent_sums_with(
    schedule: &dyn WeightSchedule,
    indices: &[usize],
    k_max: u64,
    thresholds: GrowthThresholds,
) -> Result<BTreeMap<usize, PartialSum>> {
    let slot: BTreeMap<usize, usize> = indices.iter().enumerate().map(|(n, &i)| (i, n)).collect();
    let mut totals = alloc::vec![0.0f64; indices.len()];
    let mut tails = alloc::vec![0.0f64; indices.len()];
    let decade_start = k_max / 10;
    let mut seen: Vec<usize> = Vec::new();
    for k in 0..=k_max {
        let w = schedule.weights(k)?;
        let in_tail = k > decade_start;
        let mut credit = |n: usize, weight: f64| {
            totals[n] += weight;
            if in_tail {
                tails[n] += weight;
            }
        };
        match w.support() {
            Support::Entries(entries) => {
                for (iota, weight) in entries {
                    seen.clear();
                    seen.extend(iota.indices().iter().filter(|i| slot.contains_key(i)));
                    seen.sort_unstable();
                    seen.dedup();
                    for i in &seen {
                        credit(slot[i], *weight);
                    }
                }
            }
            Support::UniformSingletons { count, weight } => {
                for (_, &n) in slot.range(1..=count) {
                    credit(n, weight);
                }
            }
        }
    }
    Ok(slot
        .iter()
        .map(|(&i, &n)| {
            let growth = classify_growth(totals[n], tails[n], thresholds);
            (i, PartialSum { total: totals[n], last_decade: tails[n], growth })
        })
        .collect())
}

/// Summarizes [`check_divergent_sums`] as a report: holds when every index
/// looks divergent.
pub fn divergent_sums_report(sums: &BTreeMap<usize, PartialSum>, k_max: u64) -> HypothesisReport {
    let divergent = sums.values().filter(|s| s.growth == Growth::ApparentlyDivergent).count();
    let detail = format!("{divergent} of {} indices apparently divergent", sums.len());
    match sums.iter().find(|(_, s)| s.growth != Growth::ApparentlyDivergent) {
        None => HypothesisReport::new(HypothesisId::DivergentSum, Verdict::HoldsOnHorizon, k_max, None, detail),
        Some((&i, s)) => HypothesisReport::new(
            HypothesisId::DivergentSum,
            Verdict::ViolatedAt {
                at: k_max,
                witness: Witness { index: Some(i), measured: s.total, bound: GrowthThresholds::default().large_sum },
            },
            k_max,
            Some(s.total),
            format!("{detail}; index {i} is {}", s.growth.label()),
        ),
    }
}

/// Finite collections always have closed unions of subcollections; infinite
/// ones are not decided.
pub fn check_uasc_finite(family: &Family) -> HypothesisReport {
    match family.kind() {
        FamilyKind::Finite => HypothesisReport::new(
            HypothesisId::UascFinite,
            Verdict::HoldsOnHorizon,
            0,
            None,
            format!("finite family of {} sets", family.head_len()),
        ),
        FamilyKind::Infinite => HypothesisReport::new(
            HypothesisId::UascFinite,
            Verdict::Inapplicable { reason: "infinite family; not decided by this check".into() },
            0,
            None,
            String::new(),
        ),
    }
}

/// A step at which a monitored inequality failed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitorViolation {
    pub k: u64,
    /// Left-hand side of the inequality.
    pub lhs: f64,
    /// Right-hand side including tolerance.
    pub rhs: f64,
}

/// Recorded iterates paired with their iteration numbers, then the final
/// point.
fn recorded_points(trace: &Trace) -> Vec<(u64, &Vector)> {
    let mut pts: Vec<(u64, &Vector)> = trace.records.iter().filter_map(|r| r.x.as_ref().map(|x| (r.k, x))).collect();
    if pts.last().is_none_or(|(k, _)| *k < trace.final_k) {
        pts.push((trace.final_k, &trace.final_x));
    }
    pts
}

fn distance_to(x: &Vector, c: &Vector) -> Result<f64> {
    x.distance_to(c)
}

/// Steps between consecutive recorded iterates where
/// `||x^{next} - c|| > ||x^k - c|| + 1e-9`. Meaningful for plain-mode traces;
/// perturbations legitimately break the inequality.
pub fn monitor_fejer(trace: &Trace, c: &Vector) -> Result<Vec<MonitorViolation>> {
    let pts = recorded_points(trace);
    let mut out = Vec::new();
    for pair in pts.windows(2) {
        let before = distance_to(pair[0].1, c)?;
        let after = distance_to(pair[1].1, c)?;
        if after > before + MONITOR_TOLERANCE {
            out.push(MonitorViolation { k: pair[0].0, lhs: after, rhs: before + MONITOR_TOLERANCE });
        }
    }
    Ok(out)
}

/// Steps where
/// `||x^{k+1} - c||^2 > ||x^k - c||^2 - ||x^{k+1} - x^k||^2 / maxLength(w^k) + 1e-9`.
/// Only consecutive pairs of recorded iterates are checked.
pub fn monitor_descent(trace: &Trace, c: &Vector) -> Result<Vec<MonitorViolation>> {
    let mut out = Vec::new();
    for (n, rec) in trace.records.iter().enumerate() {
        let Some(x) = &rec.x else { continue };
        let next = match trace.records.get(n + 1) {
            Some(r) if r.k == rec.k + 1 => r.x.as_ref(),
            Some(_) => None,
            None if trace.final_k == rec.k + 1 => Some(&trace.final_x),
            None => None,
        };
        let Some(next) = next else { continue };
        let before = distance_to(x, c)?;
        let after = distance_to(next, c)?;
        let step = math::dist(next.as_slice(), x.as_slice());
        let rhs = before * before - step * step / rec.weights.max_length as f64 + MONITOR_TOLERANCE;
        if after * after > rhs {
            out.push(MonitorViolation { k: rec.k, lhs: after * after, rhs });
        }
    }
    Ok(out)
}

/// Steps where `||x^k - c|| > ||x^0 - c|| + sum_{l<k} ||v^l|| + 1e-6`.
/// Needs an unthinned trace that records iterates.
pub fn monitor_perturbed_bound(trace: &Trace, c: &Vector) -> Result<Vec<MonitorViolation>> {
    if trace.meta.thin != 1 || trace.records.iter().any(|r| r.x.is_none()) {
        return Err(Error::InvalidParameter("perturbed bound monitor needs every iterate".into()));
    }
    let Some(first) = trace.records.first() else { return Ok(Vec::new()) };
    let start = distance_to(first.x.as_ref().expect("checked"), c)?;
    let mut budget = 0.0;
    let mut out = Vec::new();
    let mut check = |k: u64, x: &Vector, budget: f64| -> Result<()> {
        let d = distance_to(x, c)?;
        let rhs = start + budget + PERTURBED_BOUND_TOLERANCE;
        if d > rhs {
            out.push(MonitorViolation { k, lhs: d, rhs });
        }
        Ok(())
    };
    for rec in &trace.records {
        check(rec.k, rec.x.as_ref().expect("checked"), budget)?;
        budget += rec.perturbation_norm;
    }
    check(trace.final_k, &trace.final_x, budget)?;
    Ok(out)
}
