//! Running, checking and replaying experiments.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use saproj_core::engine::{RunOptions, Trace};

use crate::artifacts::{self, ArtifactPaths, Record};
use crate::config::{ConfigErrors, ExperimentConfig};
use crate::reports::{self, CheckResults, ReportsFile};
use crate::setup::Experiment;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_ABORT: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n{0}")]
    Config(#[from] ConfigErrors),
    #[error("setup failed: {0}")]
    Setup(saproj_core::Error),
    #[error("engine aborted: {0}")]
    Engine(saproj_core::Error),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine(_) => EXIT_ABORT,
            CliError::Config(_) | CliError::Setup(_) | CliError::Io(_) => EXIT_VALIDATION,
        }
    }
}

/// Command-line values that replace configuration fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub max_iters: Option<u64>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub watch: Option<Vec<usize>>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(n) = self.max_iters {
            config.stop.max_iters = Some(n);
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            config.output.dir = dir.to_string_lossy().into_owned();
        }
        if let Some(w) = &self.watch {
            config.watch = Some(w.clone());
        }
    }
}

/// What a finished run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub trace: Trace,
    pub checks: CheckResults,
    pub notes: Vec<String>,
    pub paths: ArtifactPaths,
    pub summary: String,
    pub exit_code: i32,
}

fn prepare(config: &ExperimentConfig) -> Result<Experiment, CliError> {
    config.validate()?;
    Experiment::build(config).map_err(CliError::Setup)
}

/// Validates, runs, writes every artifact and builds the summary. An engine
/// abort still writes the partial trace and yields exit code 2.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let exp = prepare(config)?;
    let checks = reports::run_checks(&exp).map_err(CliError::Setup)?;
    let notes = reports::applicability_notes(&exp, &checks);
    let trace = exp.run().map_err(CliError::Engine)?;

    let dir = Path::new(&config.output.dir);
    fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("creating {}: {e}", dir.display()))?;
    let paths = ArtifactPaths::new(dir, &config.output.name);
    let meta = artifacts::meta_record(config, &trace, exp.rays.as_ref());
    artifacts::write_ndjson(&paths.trace, &artifacts::records(meta, &trace))?;
    artifacts::write_csv(&paths.summary, &trace)?;
    artifacts::write_json(&paths.plot, &artifacts::plot_data(&trace))?;
    artifacts::write_json(&paths.reports, &checks.to_file(&notes))?;

    let mut summary = reports::summary(&config.output.name, &trace, &checks, &notes);
    summary.push_str(&format!("trace: {}\n", paths.trace.display()));
    let exit_code = if trace.stop.is_abort() { EXIT_ABORT } else { EXIT_OK };
    Ok(RunOutcome { trace, checks, notes, paths, summary, exit_code })
}

/// Runs several experiments concurrently, one thread each. Output paths must
/// be distinct so that every file has a single writer.
pub fn run_batch(configs: &[ExperimentConfig]) -> Vec<Result<RunOutcome, CliError>> {
    let mut seen = HashSet::new();
    let duplicate = configs.iter().find(|c| !seen.insert((c.output.dir.clone(), c.output.name.clone())));
    if let Some(c) = duplicate {
        let msg = format!("two experiments write to {}/{}", c.output.dir, c.output.name);
        return configs.iter().map(|_| Err(CliError::Io(anyhow::anyhow!(msg.clone())))).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || run_experiment(c))).collect();
        handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
    })
}

/// Evaluates the configured checks without iterating and writes the reports
/// file.
pub fn check_experiment(config: &ExperimentConfig) -> Result<(ReportsFile, String), CliError> {
    let exp = prepare(config)?;
    let checks = reports::run_checks(&exp).map_err(CliError::Setup)?;
    let notes = reports::applicability_notes(&exp, &checks);
    let file = checks.to_file(&notes);
    let dir = Path::new(&config.output.dir);
    fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("creating {}: {e}", dir.display()))?;
    artifacts::write_json(&ArtifactPaths::new(dir, &config.output.name).reports, &file)?;
    let mut text = String::new();
    for r in &checks.reports {
        text.push_str(&format!("check {r}\n"));
    }
    for n in &notes {
        text.push_str(&format!("note: {n}\n"));
    }
    Ok((file, text))
}

/// First disagreement between a trace file and its re-run.
#[derive(Clone, Debug, PartialEq)]
pub enum Divergence {
    /// A recorded step norm differs; `step` counts recorded steps from 1.
    StepNorm { step: usize, k: u64, recorded: f64, replayed: f64 },
    /// The re-run never reached a recorded step.
    MissingStep { step: usize, k: u64 },
    /// The runs ended differently.
    End { recorded: String, replayed: String },
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Divergence::StepNorm { step, k, recorded, replayed } => write!(
                f,
                "mismatch at step {step} (k = {k}): recorded step norm {recorded:e} ({:#018x}), replayed {replayed:e} ({:#018x})",
                recorded.to_bits(),
                replayed.to_bits()
            ),
            Divergence::MissingStep { step, k } => write!(f, "mismatch at step {step}: the re-run never reached k = {k}"),
            Divergence::End { recorded, replayed } => {
                write!(f, "runs end differently: recorded {recorded}, replayed {replayed}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    /// Number of recorded steps compared.
    pub compared: usize,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.divergence.is_none()
    }

    pub fn exit_code(&self) -> i32 {
        if self.identical() {
            EXIT_OK
        } else {
            EXIT_MISMATCH
        }
    }
}

/// Re-runs the experiment described by a trace's metadata and compares the
/// step norm of every step present in the file, bit for bit. Steps missing
/// from the file (thinned runs or hand-thinned files) are not compared. The
/// seed is taken from the top-level `seed` of the meta record.
pub fn replay(path: &Path) -> Result<ReplayReport, CliError> {
    let records = artifacts::read_ndjson(path)?;
    let meta = artifacts::meta_of(&records)?;
    let mut config = meta.config.clone();
    config.seed = meta.seed;
    let exp = prepare(&config)?;
    let options = RunOptions { thin: 1, record_points: false, ..exp.options.clone() };
    let trace = exp.run_with(&options).map_err(CliError::Engine)?;
    let replayed: BTreeMap<u64, f64> = trace.records.iter().map(|r| (r.k, r.step_norm)).collect();

    let mut compared = 0;
    for rec in &records {
        match rec {
            Record::Step(s) => {
                compared += 1;
                let divergence = match replayed.get(&s.k) {
                    None => Some(Divergence::MissingStep { step: compared, k: s.k }),
                    Some(&v) if v.to_bits() != s.step_norm.to_bits() => {
                        Some(Divergence::StepNorm { step: compared, k: s.k, recorded: s.step_norm, replayed: v })
                    }
                    Some(_) => None,
                };
                if divergence.is_some() {
                    return Ok(ReplayReport { compared, divergence });
                }
            }
            Record::End(e) => {
                let end = artifacts::end_line(&trace);
                if e.stop != end.stop || e.final_k != end.final_k {
                    let divergence = Some(Divergence::End {
                        recorded: format!("{} at k = {}", e.stop, e.final_k),
                        replayed: format!("{} at k = {}", end.stop, end.final_k),
                    });
                    return Ok(ReplayReport { compared, divergence });
                }
            }
            Record::Meta(_) | Record::Stage(_) => {}
        }
    }
    Ok(ReplayReport { compared, divergence: None })
}
