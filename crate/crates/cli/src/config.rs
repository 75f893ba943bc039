//! Experiment configuration files.
//!
//! A configuration is a TOML document. Unknown keys are rejected while
//! parsing; semantic problems (inconsistent dimensions, a plan that does not
//! fit the mode, and so on) are all collected by [`ExperimentConfig::validate`]
//! and reported together, each with the path of the offending field.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Top-level seed; every random choice derives from it.
    #[serde(default)]
    pub seed: u64,
    pub mode: ModeKind,
    /// Starting point. Optional only for the rays counterexample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Indices whose distances are recorded. Defaults to every set of a
    /// finite family, `1..=m` of the last stage for staged runs, and the
    /// first ray for the counterexample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub watch: Option<Vec<usize>>,
    /// Threshold for `eps` mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Stages for `staged_eps` mode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageSpec>,
    /// Per-stage iteration cap for `staged_eps` mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_cap: Option<u64>,
    pub family: FamilySpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub plan: PlanSpec,
    #[serde(default)]
    pub stop: StopSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Plain,
    Perturbed,
    Superiorized,
    Eps,
    StagedEps,
}

impl ModeKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModeKind::Plain => "plain",
            ModeKind::Perturbed => "perturbed",
            ModeKind::Superiorized => "superiorized",
            ModeKind::Eps => "eps",
            ModeKind::StagedEps => "staged_eps",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub m: usize,
    pub n: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Halfspace { normal: Vec<f64>, offset: f64 },
    Hyperplane { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ray { theta: f64 },
    Triangle { vertices: [[f64; 2]; 3] },
    WholeSpace { dim: usize },
}

impl SetSpec {
    pub fn dim(&self) -> Option<usize> {
        match self {
            SetSpec::Halfspace { normal, .. } | SetSpec::Hyperplane { normal, .. } => Some(normal.len()),
            SetSpec::Ball { center, .. } => Some(center.len()),
            SetSpec::Box { lo, .. } => Some(lo.len()),
            SetSpec::Ray { .. } | SetSpec::Triangle { .. } => Some(2),
            SetSpec::WholeSpace { dim } => Some(*dim),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// One hyperplane per equation `matrix[i] . x = rhs[i]`.
    LinearSystem { matrix: Vec<Vec<f64>>, rhs: Vec<f64> },
    /// An explicit finite list of sets.
    Sets { sets: Vec<SetSpec> },
    /// Optional explicit head sets followed by balls of radius
    /// `base + decay / i` around `center` (the origin when omitted).
    DescendingChain {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        base: f64,
        decay: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        head: Vec<SetSpec>,
    },
    /// Planar triangles shrinking onto the segment `[(-1,0), (1,0)]`.
    Triangles,
    /// Rays through the origin whose directions never settle.
    RaysCounterexample { prefix_len: usize },
}

impl FamilySpec {
    pub fn dim(&self) -> Option<usize> {
        match self {
            FamilySpec::LinearSystem { matrix, .. } => matrix.first().map(Vec::len),
            FamilySpec::Sets { sets } => sets.iter().find_map(SetSpec::dim),
            FamilySpec::DescendingChain { dim, .. } => Some(*dim),
            FamilySpec::Triangles | FamilySpec::RaysCounterexample { .. } => Some(2),
        }
    }

    /// Number of sets of a finite family.
    pub fn finite_size(&self) -> Option<usize> {
        match self {
            FamilySpec::LinearSystem { matrix, .. } => Some(matrix.len()),
            FamilySpec::Sets { sets } => Some(sets.len()),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationSpec {
    #[default]
    Identity,
    /// Shuffled with a seed derived from the top-level seed.
    Seeded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSpec {
    Single,
    Cimmino,
    Kaczmarz,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSpec {
    #[default]
    RepeatLast,
    Cycle,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub indices: Vec<usize>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// Weight `1/k` on each singleton `(1)..(k)`.
    #[serde(alias = "example1")]
    CimminoGrowing,
    /// The single string `(1, ..., k)`, optionally shuffled.
    #[serde(alias = "example2")]
    KaczmarzGrowing {
        #[serde(default)]
        permutation: PermutationSpec,
    },
    /// Half on `(k+2)`, half on the indices up to `k` with the parity of `k`.
    #[serde(alias = "example3")]
    OddEven {
        #[serde(default)]
        permutation: PermutationSpec,
    },
    /// Periodic schedule over `size` sets. `size` defaults to the family size,
    /// or to the stage's `m` in staged runs.
    Cyclic {
        block: BlockSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        size: Option<usize>,
    },
    /// Explicit weight functions, one row per iteration.
    Table {
        rows: Vec<Vec<WeightEntry>>,
        #[serde(default)]
        tail: TailSpec,
    },
    /// The schedule that comes with the rays counterexample.
    RaysNatural,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanSpec {
    #[default]
    None,
    /// `v^k = scale * ratio^k * (random unit vector)`.
    Geometric { scale: f64, ratio: f64 },
    /// `beta_k = scale * ratio^k`, `u^k` the unit vector toward `target`
    /// (toward the origin when omitted).
    Steer {
        scale: f64,
        ratio: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<Vec<f64>>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displacement_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displacement_window: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility_tol: Option<f64>,
}

/// `kappa_r = slope * r^power + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaSpec {
    #[serde(default = "one_u64")]
    pub slope: u64,
    #[serde(default = "one_u32")]
    pub power: u32,
    #[serde(default)]
    pub offset: u64,
}

impl KappaSpec {
    pub fn eval(&self, r: u64) -> u64 {
        self.slope.saturating_mul(r.saturating_pow(self.power)).saturating_add(self.offset)
    }
}

impl Default for KappaSpec {
    fn default() -> Self {
        KappaSpec { slope: 1, power: 1, offset: 0 }
    }
}

fn one_u64() -> u64 {
    1
}

fn one_u32() -> u32 {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FSpec {
    /// `f_r = 1 / (scale * (r + shift))`.
    Reciprocal {
        #[serde(default = "one_f64")]
        scale: f64,
        #[serde(default)]
        shift: f64,
    },
    Constant { value: f64 },
}

impl FSpec {
    pub fn eval(&self, r: u64) -> f64 {
        match self {
            FSpec::Reciprocal { scale, shift } => 1.0 / (scale * (r as f64 + shift)),
            FSpec::Constant { value } => *value,
        }
    }
}

fn one_f64() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    C1 {
        r_max: u64,
        kappa: KappaSpec,
        f: FSpec,
    },
    /// Blocks `r_min..=r_max`; `r_min` defaults to `r_max / 2`.
    C2 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_min: Option<u64>,
        r_max: u64,
        kappa: KappaSpec,
        f: FSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        indices: Option<Vec<usize>>,
    },
    H123 {
        k_max: u64,
    },
    DivergentSums {
        k_max: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        indices: Option<Vec<usize>>,
    },
    Uasc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_name")]
    pub name: String,
    /// Record every `thin`-th step.
    #[serde(default = "one_u64")]
    pub thin: u64,
    /// Whether step records include the iterate.
    #[serde(default = "yes")]
    pub record_points: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_dir(), name: default_name(), thin: 1, record_points: true }
    }
}

fn default_dir() -> String {
    "out".into()
}

fn default_name() -> String {
    "run".into()
}

fn yes() -> bool {
    true
}

/// A semantic problem with a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Every problem found in a configuration.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ValidationError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, e) in self.0.iter().enumerate() {
            if n > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

struct Collector(Vec<ValidationError>);

impl Collector {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ValidationError { path: path.into(), message: message.into() });
    }

    fn check(&mut self, ok: bool, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.push(path, message);
        }
    }

    fn finite(&mut self, values: &[f64], path: &str) {
        if values.iter().any(|v| !v.is_finite()) {
            self.push(path, "values must be finite");
        }
    }

    fn dim(&mut self, found: usize, expected: Option<usize>, path: &str) {
        if let Some(n) = expected {
            if found != n {
                self.push(path, format!("expected dimension {n}, found {found}"));
            }
        }
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let config = parse_unvalidated(text)?;
    config.validate()?;
    Ok(config)
}

/// Parses without the semantic checks, e.g. to apply command-line overrides
/// first.
pub fn parse_unvalidated(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let path = e.span().map(|s| locate(text, s.start)).unwrap_or_else(|| "<document>".into());
        ConfigErrors(vec![ValidationError { path, message }])
    })
}

/// `line L, column C` of a byte offset.
fn locate(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    format!("line {line}, column {col}")
}

/// Serializes a configuration back to TOML.
pub fn serialize_config(config: &ExperimentConfig) -> String {
    toml::to_string(config).expect("configurations always serialize")
}

impl ExperimentConfig {
    /// Collects every semantic problem.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut c = Collector(Vec::new());
        let dim = self.family.dim();
        self.validate_family(&mut c, dim);
        self.validate_schedule(&mut c);
        self.validate_mode(&mut c, dim);
        self.validate_stop(&mut c);
        self.validate_checks(&mut c);

        match (&self.x0, &self.family) {
            (Some(x0), _) => {
                c.dim(x0.len(), dim, "x0");
                c.finite(x0, "x0");
            }
            (None, FamilySpec::RaysCounterexample { .. }) => {}
            (None, _) => c.push("x0", "a starting point is required"),
        }
        if let Some(watch) = &self.watch {
            c.check(!watch.contains(&0), "watch", "indices start at 1");
        }
        c.check(self.output.thin >= 1, "output.thin", "must be at least 1");
        c.check(!self.output.name.is_empty(), "output.name", "must not be empty");

        if c.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(c.0))
        }
    }

    fn validate_family(&self, c: &mut Collector, dim: Option<usize>) {
        match &self.family {
            FamilySpec::LinearSystem { matrix, rhs } => {
                c.check(!matrix.is_empty(), "family.matrix", "needs at least one equation");
                c.check(
                    matrix.len() == rhs.len(),
                    "family.rhs",
                    format!("{} equations but {} right-hand sides", matrix.len(), rhs.len()),
                );
                for (i, row) in matrix.iter().enumerate() {
                    let path = format!("family.matrix[{i}]");
                    c.dim(row.len(), dim, &path);
                    c.finite(row, &path);
                    c.check(row.iter().any(|v| *v != 0.0), &path, "row is zero");
                }
                c.finite(rhs, "family.rhs");
            }
            FamilySpec::Sets { sets } => {
                c.check(!sets.is_empty(), "family.sets", "needs at least one set");
                c.check(
                    sets.iter().any(|s| !matches!(s, SetSpec::WholeSpace { .. })),
                    "family.sets",
                    "at least one set must be proper",
                );
                for (i, s) in sets.iter().enumerate() {
                    validate_set(c, s, dim, &format!("family.sets[{i}]"));
                }
            }
            FamilySpec::DescendingChain { dim: n, center, base, decay, head } => {
                c.check(*n >= 1, "family.dim", "must be at least 1");
                if let Some(center) = center {
                    c.dim(center.len(), Some(*n), "family.center");
                    c.finite(center, "family.center");
                }
                c.check(base.is_finite() && *base >= 0.0, "family.base", "must be finite and nonnegative");
                c.check(decay.is_finite() && *decay >= 0.0, "family.decay", "must be finite and nonnegative");
                c.check(base + decay > 0.0, "family.base", "radii must be positive");
                for (i, s) in head.iter().enumerate() {
                    validate_set(c, s, Some(*n), &format!("family.head[{i}]"));
                }
            }
            FamilySpec::Triangles => {}
            FamilySpec::RaysCounterexample { prefix_len } => {
                c.check(*prefix_len >= 2, "family.prefix_len", "must be at least 2");
            }
        }
    }

    fn validate_schedule(&self, c: &mut Collector) {
        match &self.schedule {
            ScheduleSpec::Cyclic { size, .. } => {
                let size = size.or(self.family.finite_size());
                match size {
                    None if self.mode == ModeKind::StagedEps => {}
                    None => c.push("schedule.size", "required unless the family is finite or the run is staged"),
                    Some(0) => c.push("schedule.size", "must be at least 1"),
                    Some(_) => {}
                }
            }
            ScheduleSpec::Table { rows, .. } => {
                c.check(!rows.is_empty(), "schedule.rows", "needs at least one row");
                for (r, row) in rows.iter().enumerate() {
                    let total: f64 = row.iter().map(|e| e.weight).sum();
                    let path = format!("schedule.rows[{r}]");
                    c.check(!row.is_empty(), &path, "row is empty");
                    c.check((total - 1.0).abs() <= 1e-12, &path, format!("weights sum to {total}, not 1"));
                    for (j, e) in row.iter().enumerate() {
                        let p = format!("{path}[{j}]");
                        c.check(!e.indices.is_empty() && !e.indices.contains(&0), &p, "indices must be nonempty and start at 1");
                        c.check(e.weight.is_finite() && e.weight >= 0.0, &p, "weight must be finite and nonnegative");
                    }
                }
            }
            ScheduleSpec::RaysNatural => {
                c.check(
                    matches!(self.family, FamilySpec::RaysCounterexample { .. }),
                    "schedule.kind",
                    "rays_natural needs the rays_counterexample family",
                );
            }
            ScheduleSpec::CimminoGrowing | ScheduleSpec::KaczmarzGrowing { .. } | ScheduleSpec::OddEven { .. } => {}
        }
    }

    fn validate_mode(&self, c: &mut Collector, dim: Option<usize>) {
        let plan_fits = match self.mode {
            ModeKind::Plain => matches!(self.plan, PlanSpec::None),
            ModeKind::Perturbed => matches!(self.plan, PlanSpec::Geometric { .. }),
            ModeKind::Superiorized => matches!(self.plan, PlanSpec::Steer { .. }),
            ModeKind::Eps | ModeKind::StagedEps => matches!(self.plan, PlanSpec::None | PlanSpec::Geometric { .. }),
        };
        if !plan_fits {
            let needed = match self.mode {
                ModeKind::Plain => "plain mode takes no plan",
                ModeKind::Perturbed => "perturbed mode needs a geometric plan",
                ModeKind::Superiorized => "superiorized mode needs a steer plan",
                ModeKind::Eps | ModeKind::StagedEps => "thresholded modes accept only a geometric plan",
            };
            c.push("plan.kind", needed);
        }
        match &self.plan {
            PlanSpec::None => {}
            PlanSpec::Geometric { scale, ratio } => validate_geometric(c, *scale, *ratio),
            PlanSpec::Steer { scale, ratio, target } => {
                validate_geometric(c, *scale, *ratio);
                if let Some(t) = target {
                    c.dim(t.len(), dim, "plan.target");
                    c.finite(t, "plan.target");
                }
            }
        }

        match self.mode {
            ModeKind::Eps => match self.eps {
                None => c.push("eps", "eps mode needs a threshold"),
                Some(e) => c.check(e > 0.0 && e.is_finite(), "eps", format!("must be positive, got {e}")),
            },
            _ => c.check(self.eps.is_none(), "eps", "only used in eps mode"),
        }
        if self.mode == ModeKind::StagedEps {
            c.check(!self.stages.is_empty(), "stages", "staged_eps mode needs at least one stage");
            for (i, s) in self.stages.iter().enumerate() {
                c.check(s.m >= 1 && s.n >= 1, format!("stages[{i}]"), "m and n must be positive");
            }
            for (i, pair) in self.stages.windows(2).enumerate() {
                c.check(
                    pair[1].m > pair[0].m && pair[1].n > pair[0].n,
                    format!("stages[{}]", i + 1),
                    "stages must increase strictly in m and n",
                );
            }
            if let Some(cap) = self.stage_cap {
                c.check(cap >= 1, "stage_cap", "must be at least 1");
            }
            c.check(self.stop.max_iters.is_none(), "stop.max_iters", "staged runs are bounded by stage_cap");
        } else {
            c.check(self.stages.is_empty(), "stages", "only used in staged_eps mode");
            c.check(self.stage_cap.is_none(), "stage_cap", "only used in staged_eps mode");
        }
    }

    fn validate_stop(&self, c: &mut Collector) {
        let s = &self.stop;
        if self.mode != ModeKind::StagedEps && s.max_iters.is_none() {
            c.push("stop.max_iters", "required");
        }
        match (s.displacement_tol, s.displacement_window) {
            (Some(t), _) => c.check(t > 0.0 && t.is_finite(), "stop.displacement_tol", "must be positive"),
            (None, Some(_)) => c.push("stop.displacement_window", "needs stop.displacement_tol"),
            (None, None) => {}
        }
        if let Some(w) = s.displacement_window {
            c.check(w >= 1, "stop.displacement_window", "must be at least 1");
        }
        if let Some(t) = s.feasibility_tol {
            c.check(t >= 0.0 && t.is_finite(), "stop.feasibility_tol", "must be nonnegative");
            let watches = match &self.watch {
                Some(w) => !w.is_empty(),
                None => self.family.finite_size().is_some() || matches!(self.family, FamilySpec::RaysCounterexample { .. }),
            };
            c.check(watches, "stop.feasibility_tol", "needs a nonempty watch list");
        }
        if let (ScheduleSpec::RaysNatural, FamilySpec::RaysCounterexample { prefix_len }, Some(n)) =
            (&self.schedule, &self.family, s.max_iters)
        {
            c.check(
                n < *prefix_len as u64,
                "stop.max_iters",
                format!("the ray schedule covers only {} iterations", prefix_len - 1),
            );
        }
    }

    fn validate_checks(&self, c: &mut Collector) {
        for (i, check) in self.checks.iter().enumerate() {
            let path = format!("checks[{i}]");
            match check {
                CheckSpec::C1 { r_max, kappa, f } => {
                    c.check(*r_max >= 1, format!("{path}.r_max"), "must be at least 1");
                    validate_kappa(c, kappa, &path);
                    validate_f(c, f, &path);
                }
                CheckSpec::C2 { r_min, r_max, kappa, f, indices } => {
                    c.check(*r_max >= 1, format!("{path}.r_max"), "must be at least 1");
                    if let Some(lo) = r_min {
                        c.check(*lo >= 1 && lo <= r_max, format!("{path}.r_min"), "must lie in 1..=r_max");
                    }
                    validate_kappa(c, kappa, &path);
                    validate_f(c, f, &path);
                    if let Some(idx) = indices {
                        c.check(!idx.contains(&0), format!("{path}.indices"), "indices start at 1");
                    } else {
                        c.check(
                            self.family.finite_size().is_some(),
                            format!("{path}.indices"),
                            "required unless the family is finite",
                        );
                    }
                }
                CheckSpec::H123 { .. } => {
                    c.check(self.family.finite_size().is_some(), &path, "H1-H3 apply to finite families");
                }
                CheckSpec::DivergentSums { indices, .. } => {
                    if let Some(idx) = indices {
                        c.check(!idx.contains(&0), format!("{path}.indices"), "indices start at 1");
                    }
                }
                CheckSpec::Uasc => {}
            }
            if matches!(self.schedule, ScheduleSpec::RaysNatural) {
                let horizon = match check {
                    CheckSpec::H123 { k_max } | CheckSpec::DivergentSums { k_max, .. } => Some(*k_max),
                    _ => None,
                };
                if let (Some(k), FamilySpec::RaysCounterexample { prefix_len }) = (horizon, &self.family) {
                    c.check(k + 1 < *prefix_len as u64, format!("{path}.k_max"), "beyond the ray schedule");
                }
            }
        }
    }
}

fn validate_geometric(c: &mut Collector, scale: f64, ratio: f64) {
    c.check(scale.is_finite() && scale >= 0.0, "plan.scale", "must be finite and nonnegative");
    c.check((0.0..1.0).contains(&ratio), "plan.ratio", "must lie in [0, 1)");
}

fn validate_kappa(c: &mut Collector, kappa: &KappaSpec, path: &str) {
    c.check(kappa.slope >= 1 && kappa.power >= 1, format!("{path}.kappa"), "kappa must be strictly increasing");
}

fn validate_f(c: &mut Collector, f: &FSpec, path: &str) {
    match f {
        FSpec::Reciprocal { scale, shift } => c.check(
            scale.is_finite() && *scale > 0.0 && shift.is_finite() && *scale * (1.0 + shift) >= 1.0,
            format!("{path}.f"),
            "f_r = 1/(scale (r + shift)) must lie in [0, 1] for r >= 1",
        ),
        FSpec::Constant { value } => {
            c.check((0.0..=1.0).contains(value), format!("{path}.f"), "f_r must lie in [0, 1]")
        }
    }
}

fn validate_set(c: &mut Collector, s: &SetSpec, dim: Option<usize>, path: &str) {
    if let Some(n) = s.dim() {
        c.dim(n, dim, path);
    }
    match s {
        SetSpec::Halfspace { normal, offset } | SetSpec::Hyperplane { normal, offset } => {
            c.finite(normal, path);
            c.check(offset.is_finite(), path, "offset must be finite");
            c.check(normal.iter().any(|v| *v != 0.0), path, "normal must be nonzero");
        }
        SetSpec::Ball { center, radius } => {
            c.finite(center, path);
            c.check(radius.is_finite() && *radius >= 0.0, path, "radius must be finite and nonnegative");
        }
        SetSpec::Box { lo, hi } => {
            c.finite(lo, path);
            c.finite(hi, path);
            c.check(lo.len() == hi.len(), path, "lo and hi differ in length");
            c.check(lo.iter().zip(hi).all(|(l, h)| l <= h), path, "needs lo <= hi");
        }
        SetSpec::Ray { theta } => c.check(theta.is_finite(), path, "theta must be finite"),
        SetSpec::Triangle { vertices } => c.finite(vertices.as_flattened(), path),
        SetSpec::WholeSpace { dim } => c.check(*dim >= 1, path, "dimension must be at least 1"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "plain"
x0 = [3.0, 1.0]

[family]
kind = "linear_system"
matrix = [[1.0, 0.0], [0.0, 1.0]]
rhs = [0.0, 0.0]

[schedule]
kind = "cyclic"
block = "single"

[stop]
max_iters = 10
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.mode, ModeKind::Plain);
        assert_eq!(cfg.output, OutputSpec::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_location() {
        let text = MINIMAL.replace("max_iters = 10", "max_iters = 10\nmax_iter = 3");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(err.0[0].path.starts_with("line"), "{}", err);
        assert!(err.0[0].message.contains("max_iter"), "{}", err);
    }

    #[test]
    fn every_semantic_error_is_reported() {
        let text = r#"
mode = "eps"
eps = -1.0
x0 = [3.0]

[family]
kind = "linear_system"
matrix = [[1.0, 0.0], [0.0, 0.0]]
rhs = [0.0]

[schedule]
kind = "cimmino_growing"

[plan]
kind = "steer"
scale = 1.0
ratio = 0.5
"#;
        let err = parse_config(text).unwrap_err();
        let paths: Vec<&str> = err.0.iter().map(|e| e.path.as_str()).collect();
        for expected in ["family.rhs", "family.matrix[1]", "x0", "eps", "plan.kind", "stop.max_iters"] {
            assert!(paths.contains(&expected), "missing {expected} in {paths:?}");
        }
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config(MINIMAL).unwrap();
        let again = parse_config(&serialize_config(&cfg)).unwrap();
        assert_eq!(cfg, again);
    }
}
