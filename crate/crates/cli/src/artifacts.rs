//! Trace files and plot data.
//!
//! A run writes four files into the output directory, all named after
//! `output.name`:
//!
//! - `<name>.trace.ndjson`: one JSON object per line. The first is a `meta`
//!   record holding the full configuration, then `step` records in increasing
//!   `k` with `stage` records interleaved at stage boundaries, then one `end`
//!   record.
//! - `<name>.summary.csv`: a `#` comment line carrying the schema version,
//!   then one row per recorded step with `k`, `step_norm`,
//!   `perturbation_norm` and one `d_<i>` column per watched index.
//! - `<name>.plot.json`: the series `k`, `step_norm` and the watched
//!   distances, for external plotting.
//! - `<name>.reports.json`: hypothesis reports and applicability notes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use saproj_core::engine::{StageMarker, StepRecord, Trace};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::setup::RaysData;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub mode: String,
    pub schedule: String,
    pub family: String,
    pub plan: String,
    pub eps: Option<f64>,
    pub watch: Vec<usize>,
    pub thin: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaysInfo {
    pub theta: Vec<f64>,
    pub alpha: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaRecord {
    pub schema_version: u32,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub run: RunInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<RaysInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLine {
    pub k: u64,
    pub step_norm: f64,
    pub distances: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    pub support: usize,
    pub max_length: usize,
    pub min_weight: f64,
    pub perturbation_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageLine {
    pub stage: usize,
    pub m: usize,
    pub n: u64,
    pub eps: f64,
    pub start_k: u64,
    pub end_k: u64,
    pub max_distance: f64,
    pub completed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndLine {
    pub stop: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_at: Option<u64>,
    pub final_k: u64,
    pub final_x: Vec<f64>,
    pub final_distances: Vec<f64>,
    /// `(index, running weight sum)` of each tracked index.
    pub cumulative: Vec<(usize, f64)>,
    pub perturbation_total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Meta(Box<MetaRecord>),
    Step(StepLine),
    Stage(StageLine),
    End(EndLine),
}

impl From<&StepRecord> for StepLine {
    fn from(r: &StepRecord) -> Self {
        StepLine {
            k: r.k,
            step_norm: r.step_norm,
            distances: r.distances.clone(),
            x: r.x.as_ref().map(|x| x.as_slice().to_vec()),
            support: r.weights.support,
            max_length: r.weights.max_length,
            min_weight: r.weights.min_weight,
            perturbation_norm: r.perturbation_norm,
        }
    }
}

impl From<&StageMarker> for StageLine {
    fn from(s: &StageMarker) -> Self {
        StageLine {
            stage: s.stage,
            m: s.m,
            n: s.n,
            eps: s.eps,
            start_k: s.start_k,
            end_k: s.end_k,
            max_distance: s.max_distance,
            completed: s.completed,
        }
    }
}

/// Builds the `meta` record of a run.
pub fn meta_record(config: &ExperimentConfig, trace: &Trace, rays: Option<&RaysData>) -> MetaRecord {
    let m = &trace.meta;
    MetaRecord {
        schema_version: SCHEMA_VERSION,
        seed: config.seed,
        config: config.clone(),
        run: RunInfo {
            mode: m.mode.clone(),
            schedule: m.schedule.clone(),
            family: m.family.clone(),
            plan: m.plan.clone(),
            eps: m.eps,
            watch: m.watch.clone(),
            thin: m.thin,
        },
        rays: rays.map(|r| RaysInfo { theta: r.theta.values().to_vec(), alpha: r.alpha.clone() }),
    }
}

pub fn end_line(trace: &Trace) -> EndLine {
    use saproj_core::engine::StopReason;
    let stop_at = match trace.stop {
        StopReason::NonFinite { k } | StopReason::PerturbationBoundExceeded { k } => Some(k),
        StopReason::StageCapExceeded { stage } => Some(stage as u64),
        _ => None,
    };
    EndLine {
        stop: trace.stop.label().into(),
        stop_at,
        final_k: trace.final_k,
        final_x: trace.final_x.as_slice().to_vec(),
        final_distances: trace.final_distances.clone(),
        cumulative: trace.cumulative.iter().map(|(&i, &w)| (i, w)).collect(),
        perturbation_total: trace.perturbation_total,
    }
}

/// Records in file order: stage markers follow the last step taken inside
/// their stage.
pub fn records(meta: MetaRecord, trace: &Trace) -> Vec<Record> {
    let mut out = Vec::with_capacity(trace.records.len() + trace.stages.len() + 2);
    out.push(Record::Meta(Box::new(meta)));
    let mut stages = trace.stages.iter().peekable();
    for r in &trace.records {
        while let Some(s) = stages.next_if(|s| s.end_k <= r.k) {
            out.push(Record::Stage(s.into()));
        }
        out.push(Record::Step(r.into()));
    }
    out.extend(stages.map(|s| Record::Stage(s.into())));
    out.push(Record::End(end_line(trace)));
    out
}

/// Paths of the files of one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArtifactPaths {
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub plot: PathBuf,
    pub reports: PathBuf,
}

impl ArtifactPaths {
    pub fn new(dir: &Path, name: &str) -> Self {
        ArtifactPaths {
            trace: dir.join(format!("{name}.trace.ndjson")),
            summary: dir.join(format!("{name}.summary.csv")),
            plot: dir.join(format!("{name}.plot.json")),
            reports: dir.join(format!("{name}.reports.json")),
        }
    }
}

pub fn write_ndjson(path: &Path, records: &[Record]) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ndjson(path: &Path) -> anyhow::Result<Vec<Record>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(&line).with_context(|| format!("{}: line {}", path.display(), n + 1))?;
        out.push(record);
    }
    Ok(out)
}

/// The `meta` record, which must come first.
pub fn meta_of(records: &[Record]) -> anyhow::Result<&MetaRecord> {
    match records.first() {
        Some(Record::Meta(m)) => {
            if m.schema_version != SCHEMA_VERSION {
                bail!("unsupported schema version {}", m.schema_version);
            }
            Ok(m)
        }
        _ => bail!("trace does not start with a meta record"),
    }
}

pub fn csv_header(watch: &[usize]) -> Vec<String> {
    let mut h = vec!["k".to_string(), "step_norm".into(), "perturbation_norm".into()];
    h.extend(watch.iter().map(|i| format!("d_{i}")));
    h
}

pub fn write_csv(path: &Path, trace: &Trace) -> anyhow::Result<()> {
    let mut file = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(file, "# saproj summary schema_version={SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(csv_header(&trace.meta.watch))?;
    for r in &trace.records {
        let mut row = vec![r.k.to_string(), format!("{:?}", r.step_norm), format!("{:?}", r.perturbation_norm)];
        row.extend(r.distances.iter().map(|d| format!("{d:?}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a summary file, after checking its schema line.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvSummary {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_csv(path: &Path) -> anyhow::Result<CsvSummary> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let expected = format!("# saproj summary schema_version={SCHEMA_VERSION}");
    if first.trim_end() != expected {
        bail!("{}: missing or unsupported schema line", path.display());
    }
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::parse::<f64>).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(CsvSummary { header, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub schema_version: u32,
    pub k: Vec<u64>,
    pub step_norm: Vec<f64>,
    /// Distance series keyed by watched index.
    pub distances: BTreeMap<usize, Vec<f64>>,
}

pub fn plot_data(trace: &Trace) -> PlotData {
    let mut distances: BTreeMap<usize, Vec<f64>> = trace.meta.watch.iter().map(|&i| (i, Vec::new())).collect();
    for r in &trace.records {
        for (i, d) in trace.meta.watch.iter().zip(&r.distances) {
            distances.get_mut(i).expect("watched index").push(*d);
        }
    }
    PlotData {
        schema_version: SCHEMA_VERSION,
        k: trace.records.iter().map(|r| r.k).collect(),
        step_norm: trace.records.iter().map(|r| r.step_norm).collect(),
        distances,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
