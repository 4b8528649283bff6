//! Experiment runner: sweeps, result tables, summaries, calibration,
//! golden-trace replay and scenario validation.
//!
//! # Experiment spec
//!
//! ```toml
//! scenario = "crossing.toml"        # relative to the spec file
//! schemes = ["CEVAS", "EARO-like"]
//! sweep = "transmission_rate"       # or "frame_interval", "camera_count"
//! values = [80, 100, 120, 140, 160]
//! seeds = [1, 2, 3, 4, 5]           # optional, five seeds by default
//! out_dir = "results/rate"          # optional
//! pipeline = "calibration.toml"     # optional pipeline constants
//! frame_interval = 1                # used when not swept
//! block_size = 32                   # optional threshold overrides
//! t_new = 256.0
//! t_dis = 0.1
//! t_iou = 0.2
//! t_s = 0.05
//! ```
//!
//! Outputs are `results.csv`, `manifest.json` and, when the table holds
//! CEVAS and at least one baseline, `summary.txt`. Files carry no
//! timestamps; identical specs give identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::netmodel::{fit_rate_curve, NetError, RateCurve};
use crate::pipeline::{
    processed_ticks, run_scenario, run_tick, PipelineConfig, PipelineError, PipelineState, Scheme, SchemeConfig,
    TickTrace,
};
use crate::detector::SyntheticDetector;
use crate::region::RegionLabel;
use crate::scene::{Scene, SceneError};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "COOPVISION_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Spec { path: String, message: String },
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("{scheme}, {axis} = {value}, seed {seed}: {source}")]
    Run {
        scheme: Scheme,
        axis: SweepAxis,
        value: f64,
        seed: u64,
        #[source]
        source: PipelineError,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("results table: {0}")]
    Table(String),
    #[error("summary: {0}")]
    Summary(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_text(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, HarnessError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Spec {
        path: path.display().to_string(),
        message: format!("at `{}`: {}", e.path(), e.inner().message()),
    })
}

pub fn load_pipeline_config(path: &Path) -> Result<PipelineConfig, HarnessError> {
    let cfg: PipelineConfig = parse_toml(path, &read_text(path)?)?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    FrameInterval,
    CameraCount,
    TransmissionRate,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::FrameInterval => "frame_interval",
            SweepAxis::CameraCount => "camera_count",
            SweepAxis::TransmissionRate => "transmission_rate",
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "frame_interval" => Ok(SweepAxis::FrameInterval),
            "camera_count" => Ok(SweepAxis::CameraCount),
            "transmission_rate" => Ok(SweepAxis::TransmissionRate),
            _ => Err(format!(
                "unknown sweep `{s}`, expected frame_interval, camera_count or transmission_rate"
            )),
        }
    }
}

fn default_frame_interval() -> u64 {
    1
}

/// Experiment description as written in a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: PathBuf,
    pub schemes: Vec<Scheme>,
    pub sweep: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PathBuf>,
    #[serde(default = "default_frame_interval")]
    pub frame_interval: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_new: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_dis: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_iou: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_s: Option<f64>,
}

impl ExperimentSpec {
    /// Reads a spec; relative paths inside it resolve against its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let mut spec: ExperimentSpec = parse_toml(path, &read_text(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        spec.scenario = base.join(&spec.scenario);
        spec.pipeline = spec.pipeline.map(|p| base.join(p));
        Ok(spec)
    }

    pub fn seeds_or_default(&self, scene: &Scene) -> Vec<u64> {
        self.seeds
            .clone()
            .unwrap_or_else(|| (0..5).map(|i| scene.config.seed + i).collect())
    }
}

/// A spec with its scenario and constants loaded and checked.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub scene: Scene,
    pub pipeline: PipelineConfig,
    pub seeds: Vec<u64>,
}

impl Experiment {
    pub fn load(spec: ExperimentSpec) -> Result<Self, HarnessError> {
        let scene = Scene::from_file(&spec.scenario)?;
        let mut pipeline = match &spec.pipeline {
            Some(p) => load_pipeline_config(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(b) = spec.block_size {
            pipeline.block_size = b;
        }
        let seeds = spec.seeds_or_default(&scene);
        let exp = Self {
            spec,
            scene,
            pipeline,
            seeds,
        };
        exp.validate()?;
        Ok(exp)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let s = &self.spec;
        let bad = |m: String| Err(HarnessError::Invalid(m));
        if s.schemes.is_empty() {
            return bad("schemes must not be empty".into());
        }
        if s.values.is_empty() {
            return bad("values must not be empty".into());
        }
        if s.values.windows(2).any(|w| !(w[0] < w[1])) {
            return bad(format!("values must be strictly increasing, got {:?}", s.values));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        let mut schemes = s.schemes.clone();
        schemes.sort();
        schemes.dedup();
        if schemes.len() != s.schemes.len() {
            return bad("schemes must be distinct".into());
        }
        for &v in &s.values {
            match s.sweep {
                SweepAxis::FrameInterval | SweepAxis::CameraCount => {
                    if !(v >= 1.0 && v.fract() == 0.0) {
                        return bad(format!("{} values must be positive integers, got {v}", s.sweep));
                    }
                }
                SweepAxis::TransmissionRate => {
                    if !(v > 0.0 && v.is_finite()) {
                        return bad(format!("transmission_rate values must be > 0, got {v}"));
                    }
                }
            }
            if s.sweep == SweepAxis::CameraCount && v as usize > self.scene.cameras.len() {
                return bad(format!(
                    "camera_count {v} exceeds the {} cameras in the scenario",
                    self.scene.cameras.len()
                ));
            }
        }
        self.pipeline.validate()?;
        for &scheme in &s.schemes {
            let (sc, _) = self.point(scheme, s.values[0]);
            sc.validate(&self.pipeline.bank)?;
        }
        Ok(())
    }

    /// Scheme and pipeline configuration at one sweep value.
    pub fn point(&self, scheme: Scheme, value: f64) -> (SchemeConfig, PipelineConfig) {
        let s = &self.spec;
        let mut pipeline = self.pipeline.clone();
        let mut sc = SchemeConfig::new(scheme, pipeline.block_size, &pipeline.bank);
        sc.frame_interval = s.frame_interval;
        if let Some(v) = s.t_new {
            sc.thresholds.t_new = v;
        }
        if let Some(v) = s.t_dis {
            sc.thresholds.t_dis = v;
        }
        if let Some(v) = s.t_iou {
            sc.t_iou = v;
        }
        if let Some(v) = s.t_s {
            sc.t_s = v;
        }
        match s.sweep {
            SweepAxis::FrameInterval => sc.frame_interval = value as u64,
            SweepAxis::CameraCount => pipeline.camera_count = Some(value as usize),
            SweepAxis::TransmissionRate => pipeline.link.transmission_rate = value,
        }
        (sc, pipeline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub sweep: SweepAxis,
    pub value: f64,
    pub seed: u64,
    pub mean_iou: f64,
    pub mean_data_size_ratio: f64,
    pub mean_response_latency: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.scheme
                .cmp(&b.scheme)
                .then(a.sweep.cmp(&b.sweep))
                .then(a.value.total_cmp(&b.value))
                .then(a.seed.cmp(&b.seed))
        });
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| HarnessError::Table(e.to_string()))?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "scheme",
                "sweep",
                "value",
                "seed",
                "mean_iou",
                "mean_data_size_ratio",
                "mean_response_latency",
            ])
            .map_err(|e| HarnessError::Table(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Table(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| HarnessError::Table(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r
            .deserialize()
            .collect::<Result<Vec<ResultRow>, _>>()
            .map_err(|e| HarnessError::Table(e.to_string()))?;
        Ok(Self { rows })
    }
}

/// Runs every (scheme, value, seed) point; rows come back sorted by key.
pub fn run_experiment(exp: &Experiment) -> Result<ResultsTable, HarnessError> {
    let (table, errors) = run_points(exp);
    match errors.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(table),
    }
}

fn run_points(exp: &Experiment) -> (ResultsTable, Vec<HarnessError>) {
    let s = &exp.spec;
    let points: Vec<(Scheme, f64, u64)> = s
        .schemes
        .iter()
        .flat_map(|&sc| s.values.iter().flat_map(move |&v| exp.seeds.iter().map(move |&seed| (sc, v, seed))))
        .collect();
    let outcomes: Vec<Result<ResultRow, HarnessError>> = points
        .par_iter()
        .map(|&(scheme, value, seed)| {
            let (sc, pipeline) = exp.point(scheme, value);
            let run = run_scenario(&exp.scene, &sc, &pipeline, seed).map_err(|source| HarnessError::Run {
                scheme,
                axis: s.sweep,
                value,
                seed,
                source,
            })?;
            Ok(ResultRow {
                scheme,
                sweep: s.sweep,
                value,
                seed,
                mean_iou: run.metrics.mean_iou,
                mean_data_size_ratio: run.metrics.mean_data_size_ratio,
                mean_response_latency: run.metrics.mean_latency,
            })
        })
        .collect();
    let mut table = ResultsTable::default();
    let mut errors = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => table.rows.push(r),
            Err(e) => errors.push(e),
        }
    }
    table.sort();
    (table, errors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: String,
    pub code_version: String,
    pub spec_sha256: String,
    pub scenario_sha256: String,
    pub pipeline_sha256: String,
    pub sweep: SweepAxis,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub seeds: Vec<u64>,
    pub rows: usize,
    pub errors: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Where results go: the spec's `out_dir`, else `$COOPVISION_OUT_DIR`,
/// else `results`.
pub fn resolve_out_dir(spec_out: Option<&Path>) -> PathBuf {
    spec_out
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultsTable,
    pub manifest: Manifest,
    pub out_dir: PathBuf,
}

/// Runs the experiment and writes its files. Failed points leave a
/// manifest with status `partial` beside whatever rows succeeded, and the
/// first failure is returned.
pub fn run_and_write(exp: &Experiment, out_dir: &Path) -> Result<RunOutput, HarnessError> {
    let (table, errors) = run_points(exp);
    let manifest = Manifest {
        status: if errors.is_empty() { "complete" } else { "partial" }.into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        spec_sha256: sha256_hex(&serde_json::to_vec(&exp.spec).expect("spec serializes")),
        scenario_sha256: exp.scene.fingerprint()?,
        pipeline_sha256: sha256_hex(&serde_json::to_vec(&exp.pipeline).expect("config serializes")),
        sweep: exp.spec.sweep,
        values: exp.spec.values.clone(),
        schemes: exp.spec.schemes.clone(),
        seeds: exp.seeds.clone(),
        rows: table.rows.len(),
        errors: errors.iter().map(|e| e.to_string()).collect(),
    };
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let manifest_path = out_dir.join("manifest.json");
    let mut manifest_text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_text.push('\n');
    // Manifest first: a crash in between never leaves rows without one.
    std::fs::write(&manifest_path, manifest_text).map_err(io_err(&manifest_path))?;
    let results_path = out_dir.join("results.csv");
    std::fs::write(&results_path, table.to_csv()?).map_err(io_err(&results_path))?;
    let summary_path = out_dir.join("summary.txt");
    match summarize(&table) {
        Ok(s) => std::fs::write(&summary_path, s.render()).map_err(io_err(&summary_path))?,
        Err(_) => {
            let _ = std::fs::remove_file(&summary_path);
        }
    }
    if let Some(e) = errors.into_iter().next() {
        return Err(e);
    }
    Ok(RunOutput {
        table,
        manifest,
        out_dir: out_dir.to_path_buf(),
    })
}

// ---------------------------------------------------------------------------
// Summary

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single seed.
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeStats {
    pub scheme: Scheme,
    pub value: f64,
    pub seeds: usize,
    pub iou: MeanStd,
    pub data_size_ratio: MeanStd,
    pub latency: MeanStd,
}

/// Percentage change of CEVAS relative to one baseline, `None` where the
/// baseline mean is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub value: f64,
    pub baseline: Scheme,
    pub iou_pct: Option<f64>,
    pub data_size_pct: Option<f64>,
    pub latency_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub sweep: SweepAxis,
    pub stats: Vec<SchemeStats>,
    pub deltas: Vec<Delta>,
}

fn pct(ours: f64, base: f64) -> Option<f64> {
    if base == 0.0 {
        (ours == 0.0).then_some(0.0)
    } else {
        Some((ours - base) / base * 100.0)
    }
}

pub fn summarize(table: &ResultsTable) -> Result<Summary, HarnessError> {
    let first = table
        .rows
        .first()
        .ok_or_else(|| HarnessError::Summary("empty results table".into()))?;
    let sweep = first.sweep;
    if table.rows.iter().any(|r| r.sweep != sweep) {
        return Err(HarnessError::Summary("rows mix several sweep axes".into()));
    }
    let mut groups: BTreeMap<(Scheme, u64), (f64, Vec<&ResultRow>)> = BTreeMap::new();
    for r in &table.rows {
        groups.entry((r.scheme, r.value.to_bits())).or_insert((r.value, Vec::new())).1.push(r);
    }
    let stats: Vec<SchemeStats> = groups
        .iter()
        .map(|(&(scheme, _), (value, rows))| {
            let col = |f: fn(&ResultRow) -> f64| MeanStd::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            SchemeStats {
                scheme,
                value: *value,
                seeds: rows.len(),
                iou: col(|r| r.mean_iou),
                data_size_ratio: col(|r| r.mean_data_size_ratio),
                latency: col(|r| r.mean_response_latency),
            }
        })
        .collect();
    let ours: Vec<&SchemeStats> = stats.iter().filter(|s| s.scheme == Scheme::Cevas).collect();
    if ours.is_empty() {
        return Err(HarnessError::Summary("no CEVAS rows to compare".into()));
    }
    let baselines: Vec<&SchemeStats> = stats.iter().filter(|s| s.scheme != Scheme::Cevas).collect();
    if baselines.is_empty() {
        return Err(HarnessError::Summary("no baseline rows to compare against".into()));
    }
    let mut deltas = Vec::new();
    for b in &baselines {
        let o = ours
            .iter()
            .find(|o| o.value == b.value)
            .ok_or_else(|| HarnessError::Summary(format!("{} has rows at {} but CEVAS does not", b.scheme, b.value)))?;
        deltas.push(Delta {
            value: b.value,
            baseline: b.scheme,
            iou_pct: pct(o.iou.mean, b.iou.mean),
            data_size_pct: pct(o.data_size_ratio.mean, b.data_size_ratio.mean),
            latency_pct: pct(o.latency.mean, b.latency.mean),
        });
    }
    Ok(Summary { sweep, stats, deltas })
}

impl Summary {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>10} {:>5}  {:>17}  {:>17}  {:>17}",
            "scheme", self.sweep.name(), "seeds", "iou", "data_size_ratio", "latency_s"
        );
        for r in &self.stats {
            let _ = writeln!(
                s,
                "{:<12} {:>10} {:>5}  {:>8.4} ± {:<6.4}  {:>8.4} ± {:<6.4}  {:>8.4} ± {:<6.4}",
                r.scheme.name(),
                r.value,
                r.seeds,
                r.iou.mean,
                r.iou.std,
                r.data_size_ratio.mean,
                r.data_size_ratio.std,
                r.latency.mean,
                r.latency.std
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "CEVAS vs     {:>10}  {:>9}  {:>11}  {:>9}",
            self.sweep.name(),
            "iou %",
            "data size %",
            "latency %"
        );
        let f = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:+.2}"));
        for d in &self.deltas {
            let _ = writeln!(
                s,
                "{:<12} {:>10}  {:>9}  {:>11}  {:>9}",
                d.baseline.name(),
                d.value,
                f(d.iou_pct),
                f(d.data_size_pct),
                f(d.latency_pct)
            );
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Calibration

/// Latency targets per transmission rate for one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTarget {
    pub scheme: Scheme,
    pub rates: Vec<f64>,
    pub latency: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    0.05
}

impl CalibrationTarget {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let t: Self = parse_toml(path, &read_text(path)?)?;
        if t.rates.len() != t.latency.len() || t.rates.len() < 2 {
            return Err(HarnessError::Spec {
                path: path.display().to_string(),
                message: "rates and latency need the same length, at least two".into(),
            });
        }
        Ok(t)
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.rates.iter().copied().zip(self.latency.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCell {
    pub rate: f64,
    pub target: f64,
    pub measured: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub curve: RateCurve,
    pub compression_factor: f64,
    pub detector_latency_scale: f64,
    pub fixed_overhead: f64,
    pub cells: Vec<CalibrationCell>,
    pub max_relative_error: f64,
    pub within_tolerance: bool,
    pub config: PipelineConfig,
}

/// Fits payload scale, link overhead and detector latency scale so that
/// `target.scheme` on `scene` reproduces the target latencies, then checks
/// the fit by re-running the pipeline at every target rate.
///
/// The latency is `filter + overhead + 8 * bytes / rate + inference`, so a
/// `C + B / r` curve fitted to the targets fixes the payload through `B`
/// and the remaining constant through `C`.
pub fn calibrate(
    scene: &Scene,
    base: &PipelineConfig,
    target: &CalibrationTarget,
    seeds: &[u64],
) -> Result<CalibrationReport, HarnessError> {
    if seeds.is_empty() {
        return Err(HarnessError::Invalid("calibration needs at least one seed".into()));
    }
    let curve = fit_rate_curve(&target.points())?;
    if !(curve.per_rate > 0.0 && curve.constant > 0.0) {
        return Err(HarnessError::Invalid(format!(
            "target latencies do not fall with rate (fit C = {}, B = {})",
            curve.constant, curve.per_rate
        )));
    }
    let mut probe = base.clone();
    probe.payload.compression_factor = 1.0;
    let scheme = SchemeConfig::new(target.scheme, probe.block_size, &probe.bank);
    let runs = seeds
        .par_iter()
        .map(|&s| run_scenario(scene, &scheme, &probe, s))
        .collect::<Result<Vec<_>, _>>()?;
    let n = runs.len() as f64;
    let bytes = runs.iter().map(|r| r.metrics.mean_payload_bytes).sum::<f64>() / n;
    let filter = runs.iter().map(|r| r.metrics.mean_filter_time).sum::<f64>() / n;
    let inference = runs.iter().map(|r| r.metrics.mean_inference_time).sum::<f64>() / n;
    if !(bytes > 0.0 && inference > 0.0) {
        return Err(HarnessError::Invalid("scheme offloads nothing; cannot calibrate".into()));
    }

    let compression_factor = curve.per_rate * 1e6 / (8.0 * bytes);
    let mut fixed_overhead = base.link.fixed_overhead;
    let mut scale = (curve.constant - filter - fixed_overhead) / inference;
    if scale <= 0.0 {
        fixed_overhead = 0.0;
        scale = (curve.constant - filter) / inference;
    }
    if scale <= 0.0 {
        return Err(HarnessError::Invalid(format!(
            "filter time {filter:.4} s alone exceeds the fitted constant {:.4} s",
            curve.constant
        )));
    }
    let mut config = base.clone();
    config.payload.compression_factor = compression_factor;
    config.link.fixed_overhead = fixed_overhead;
    config.bank = base.bank.scaled_latency(scale);

    let mut cells = Vec::new();
    for (rate, want) in target.points() {
        let mut c = config.clone();
        c.link.transmission_rate = rate;
        let measured = seeds
            .par_iter()
            .map(|&s| run_scenario(scene, &scheme, &c, s).map(|r| r.metrics.mean_latency))
            .collect::<Result<Vec<_>, _>>()?
            .iter()
            .sum::<f64>()
            / n;
        cells.push(CalibrationCell {
            rate,
            target: want,
            measured,
            relative_error: ((measured - want) / want).abs(),
        });
    }
    let max_relative_error = cells.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    Ok(CalibrationReport {
        curve,
        compression_factor,
        detector_latency_scale: scale,
        fixed_overhead,
        within_tolerance: max_relative_error <= target.tolerance,
        max_relative_error,
        cells,
        config,
    })
}

pub fn pipeline_config_toml(config: &PipelineConfig) -> String {
    toml::to_string(config).expect("pipeline config serializes")
}

// ---------------------------------------------------------------------------
// Golden replay

/// A frozen tick trace with everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenTrace {
    /// Scenario path relative to the golden file.
    pub scenario: PathBuf,
    pub scheme: SchemeConfig,
    pub pipeline: PipelineConfig,
    pub seed: u64,
    pub tick: u64,
    pub trace: TickTrace,
}

/// Runs the loop up to and including `tick` and returns that tick's trace.
pub fn trace_at(
    scene: &Scene,
    scheme: &SchemeConfig,
    config: &PipelineConfig,
    seed: u64,
    tick: u64,
) -> Result<TickTrace, HarnessError> {
    config.validate()?;
    scheme.validate(&config.bank)?;
    let mut state = PipelineState::new(scene, config)?;
    for t in processed_ticks(scene.horizon(), scheme.frame_interval) {
        let trace = run_tick(&mut state, scene, scheme, config, &SyntheticDetector, t, seed)?;
        if t == tick {
            return Ok(trace);
        }
        if t > tick {
            break;
        }
    }
    Err(HarnessError::Invalid(format!(
        "tick {tick} is not processed at frame interval {}",
        scheme.frame_interval
    )))
}

pub fn golden_json(g: &GoldenTrace) -> String {
    let mut s = serde_json::to_string_pretty(g).expect("golden serializes");
    s.push('\n');
    s
}

pub fn make_golden(
    scenario: &Path,
    scenario_rel: &Path,
    scheme: SchemeConfig,
    pipeline: PipelineConfig,
    seed: u64,
    tick: u64,
) -> Result<GoldenTrace, HarnessError> {
    let scene = Scene::from_file(scenario)?;
    let trace = trace_at(&scene, &scheme, &pipeline, seed, tick)?;
    Ok(GoldenTrace {
        scenario: scenario_rel.to_path_buf(),
        scheme,
        pipeline,
        seed,
        tick,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub passed: bool,
    /// First differing line of the serialized traces.
    pub first_difference: Option<(usize, String, String)>,
}

pub fn replay(golden_path: &Path) -> Result<ReplayOutcome, HarnessError> {
    let text = read_text(golden_path)?;
    let golden: GoldenTrace = serde_json::from_str(&text).map_err(|e| HarnessError::Spec {
        path: golden_path.display().to_string(),
        message: e.to_string(),
    })?;
    let scenario = golden_path.parent().unwrap_or(Path::new("")).join(&golden.scenario);
    let scene = Scene::from_file(&scenario)?;
    let trace = trace_at(&scene, &golden.scheme, &golden.pipeline, golden.seed, golden.tick)?;
    let regenerated = golden_json(&GoldenTrace { trace, ..golden });
    if regenerated == text {
        return Ok(ReplayOutcome {
            passed: true,
            first_difference: None,
        });
    }
    let diff = text
        .lines()
        .zip(regenerated.lines())
        .enumerate()
        .find(|(_, (a, b))| a != b)
        .map(|(i, (a, b))| (i + 1, a.to_string(), b.to_string()))
        .or_else(|| {
            let n = text.lines().count().min(regenerated.lines().count());
            Some((n + 1, "<length differs>".into(), "<length differs>".into()))
        });
    Ok(ReplayOutcome {
        passed: false,
        first_difference: diff,
    })
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraReport {
    pub camera_id: u32,
    pub blocks: usize,
    pub histogram: BTreeMap<RegionLabel, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub fingerprint: String,
    pub cameras: Vec<CameraReport>,
    pub warnings: Vec<String>,
}

pub fn validate_scenario(path: &Path, block_size: u32) -> Result<ValidationReport, HarnessError> {
    let scene = Scene::from_file(path)?;
    let config = PipelineConfig {
        block_size,
        ..PipelineConfig::default()
    };
    let state = PipelineState::new(&scene, &config)?;
    let cameras = state
        .region_maps()
        .map(|m| CameraReport {
            camera_id: m.camera_id,
            blocks: m.grid.block_count(),
            histogram: m.histogram(),
        })
        .collect();
    Ok(ValidationReport {
        scenario: scene.config.name.clone(),
        fingerprint: scene.fingerprint()?,
        cameras,
        warnings: scene.lint(),
    })
}
