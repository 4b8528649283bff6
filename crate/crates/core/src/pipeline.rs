//! Closed camera to edge to camera loop, one tick at a time.
//!
//! Each processed tick every camera renders its frame, computes flow since
//! its previous processed tick, filters, and ships the surviving blocks to a
//! shared edge server. The server runs the chosen detector tier per frame in
//! camera-id order, so a frame waits for the inferences queued before it.
//! Sharing updates for the tick are applied in camera-id order before any
//! camera receives shared results, and each camera's merged result becomes
//! its history for the next processed tick.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{
    mean_pairwise_iou, select_tier, visible_in_blocks, BoxSource, DetectionResult, Detector, DetectorBank,
    DetectorError, SyntheticDetector, TaggedBox,
};
use crate::filter::{
    assemble_filtered, filter_frame, filter_frame_full, filter_frame_tracking, FilterError, FilterOutput,
    FilterThresholds, PayloadModel,
};
use crate::geometry::{iou, BBox, BlockGrid, GeometryError};
use crate::netmodel::{data_size_ratio, filter_latency, response_latency, tx_latency, LatencyBreakdown, LinkModel, NetError};
use crate::region::{partition, RegionError, RegionMap};
use crate::scene::{CameraModel, FlowField, Scene, SceneError};
use crate::sharing::{MatchEvent, MatchOutcome, SharingList, SharingParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("camera {camera}, tick {tick}: {source}")]
    Scene {
        camera: u32,
        tick: u64,
        #[source]
        source: SceneError,
    },
    #[error("camera {camera}, tick {tick}: {source}")]
    Filter {
        camera: u32,
        tick: u64,
        #[source]
        source: FilterError,
    },
    #[error("camera {camera}: {source}")]
    Region {
        camera: u32,
        #[source]
        source: RegionError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "CEVAS")]
    Cevas,
    #[serde(rename = "EARO-like")]
    EaroLike,
    #[serde(rename = "NoShare")]
    NoShare,
    #[serde(rename = "NoSelect")]
    NoSelect,
    #[serde(rename = "FullOffload")]
    FullOffload,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Cevas,
        Scheme::EaroLike,
        Scheme::NoShare,
        Scheme::NoSelect,
        Scheme::FullOffload,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Cevas => "CEVAS",
            Scheme::EaroLike => "EARO-like",
            Scheme::NoShare => "NoShare",
            Scheme::NoSelect => "NoSelect",
            Scheme::FullOffload => "FullOffload",
        }
    }

    pub fn shares(self) -> bool {
        matches!(self, Scheme::Cevas | Scheme::NoSelect)
    }

    pub fn selects_tier(self) -> bool {
        matches!(self, Scheme::Cevas | Scheme::NoShare)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Scheme::ALL
            .into_iter()
            .find(|sc| {
                sc.name()
                    .chars()
                    .filter(|c| c.is_ascii_alphanumeric())
                    .collect::<String>()
                    .eq_ignore_ascii_case(&norm)
            })
            .ok_or_else(|| {
                let names: Vec<_> = Scheme::ALL.iter().map(|s| s.name()).collect();
                format!("unknown scheme `{s}`, expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub thresholds: FilterThresholds,
    pub t_iou: f64,
    pub t_s: f64,
    /// Detector tier for NoSelect; must be absent for every other scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_tier: Option<String>,
    pub frame_interval: u64,
}

impl SchemeConfig {
    /// Default thresholds for `block_size`; NoSelect pins the most
    /// accurate tier of `bank`.
    pub fn new(scheme: Scheme, block_size: u32, bank: &DetectorBank) -> Self {
        Self {
            scheme,
            thresholds: FilterThresholds::for_block_size(block_size),
            t_iou: 0.2,
            t_s: 0.05,
            fixed_tier: (scheme == Scheme::NoSelect).then(|| bank.tiers[bank.most_accurate()].name.clone()),
            frame_interval: 1,
        }
    }

    pub fn validate(&self, bank: &DetectorBank) -> Result<(), PipelineError> {
        self.thresholds
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.frame_interval == 0 {
            return Err(PipelineError::Config("frame_interval must be >= 1".into()));
        }
        if !(self.t_iou >= 0.0 && self.t_iou.is_finite()) {
            return Err(PipelineError::Config(format!("t_iou must be >= 0, got {}", self.t_iou)));
        }
        if !(self.t_s >= 0.0 && self.t_s.is_finite()) {
            return Err(PipelineError::Config(format!("t_s must be >= 0, got {}", self.t_s)));
        }
        match (&self.fixed_tier, self.scheme) {
            (Some(t), Scheme::NoSelect) => {
                bank.index_of(t)?;
            }
            (None, Scheme::NoSelect) => {
                return Err(PipelineError::Config("NoSelect requires fixed_tier".into()));
            }
            (Some(_), s) => {
                return Err(PipelineError::Config(format!("fixed_tier is only valid for NoSelect, not {s}")));
            }
            (None, _) => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub block_size: u32,
    pub link: LinkModel,
    pub payload: PayloadModel,
    /// Seconds of on-camera work per filter cost unit.
    pub filter_cost_per_unit: f64,
    pub bank: DetectorBank,
    pub sharing: SharingParams,
    /// Feed shared boxes back into the history the filter sees next tick.
    pub shared_in_history: bool,
    /// Merged boxes overlapping an earlier kept box above this IoU are dropped.
    pub merge_iou: f64,
    /// Use only the first `n` cameras by id.
    pub camera_count: Option<usize>,
    /// Ticks skipped before sharing-consistency checks are meaningful.
    pub warmup_ticks: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            block_size: 32,
            link: LinkModel::default(),
            payload: PayloadModel::default(),
            filter_cost_per_unit: 2.0e-5,
            bank: DetectorBank::default(),
            sharing: SharingParams::default(),
            shared_in_history: true,
            merge_iou: 0.5,
            camera_count: None,
            warmup_ticks: 2,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.block_size == 0 {
            return Err(PipelineError::Config("block_size must be > 0".into()));
        }
        self.link.validate()?;
        self.bank.validate()?;
        if !(self.payload.compression_factor > 0.0 && self.payload.compression_factor.is_finite()) {
            return Err(PipelineError::Config("payload.compression_factor must be > 0".into()));
        }
        if !(self.filter_cost_per_unit >= 0.0) {
            return Err(PipelineError::Config("filter_cost_per_unit must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.merge_iou) {
            return Err(PipelineError::Config("merge_iou must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.sharing.blend_old) {
            return Err(PipelineError::Config("sharing.blend_old must be in [0, 1]".into()));
        }
        if self.camera_count == Some(0) {
            return Err(PipelineError::Config("camera_count must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraTrace {
    pub camera_id: u32,
    pub filter: FilterOutput,
    /// Merged detected, reused and shared boxes.
    pub detection: DetectionResult,
    pub latency: LatencyBreakdown,
    pub data_size_ratio: f64,
    pub truth_count: usize,
    /// `None` when the frame has no ground truth.
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickTrace {
    pub tick: u64,
    pub cameras: Vec<CameraTrace>,
    pub match_events: Vec<MatchEvent>,
    /// Live sharing objects positioned inside the overlap polygon.
    pub sharing_live_in_overlap: usize,
    /// Vehicles whose center lies inside the overlap polygon.
    pub truth_in_overlap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SharingStats {
    pub matches: u64,
    pub correct_matches: u64,
    /// Observations of a vehicle that already had a live entry.
    pub known_observations: u64,
    pub known_matched_correctly: u64,
    pub inserts: u64,
    pub checked_ticks: u64,
    pub count_mismatch_ticks: u64,
}

impl SharingStats {
    pub fn precision(&self) -> f64 {
        if self.matches == 0 {
            1.0
        } else {
            self.correct_matches as f64 / self.matches as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.known_observations == 0 {
            1.0
        } else {
            self.known_matched_correctly as f64 / self.known_observations as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scheme: Scheme,
    pub camera_frames: u64,
    /// Mean over frames with ground truth; 1.0 if there are none.
    pub mean_iou: f64,
    pub mean_data_size_ratio: f64,
    pub mean_latency: f64,
    pub mean_filter_time: f64,
    pub mean_tx_time: f64,
    pub mean_inference_time: f64,
    pub mean_payload_bytes: f64,
    pub tier_usage: BTreeMap<String, u64>,
    pub sharing: SharingStats,
}

/// Greedy one-to-one matching by descending IoU; the score is the mean over
/// truth boxes of the matched IoU, unmatched truth counting zero. An empty
/// truth list scores 1.
pub fn frame_iou(predicted: &[BBox], truth: &[BBox]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in predicted.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let v = iou(p, t);
            if v > 0.0 {
                pairs.push((v, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; predicted.len()];
    let mut used_t = vec![false; truth.len()];
    let mut sum = 0.0;
    for (v, i, j) in pairs {
        if !used_p[i] && !used_t[j] {
            used_p[i] = true;
            used_t[j] = true;
            sum += v;
        }
    }
    sum / truth.len() as f64
}

/// Detected boxes first, then reused, then shared; a candidate overlapping
/// an already kept box by more than `suppress_iou` is dropped.
pub fn merge_results(detected: DetectionResult, reused: &[BBox], shared: &[BBox], suppress_iou: f64) -> DetectionResult {
    let mut kept: Vec<TaggedBox> = Vec::with_capacity(detected.boxes.len() + reused.len() + shared.len());
    let candidates = detected
        .boxes
        .iter()
        .copied()
        .chain(reused.iter().map(|b| TaggedBox {
            bbox: *b,
            source: BoxSource::Reused,
        }))
        .chain(shared.iter().map(|b| TaggedBox {
            bbox: *b,
            source: BoxSource::Shared,
        }));
    for c in candidates {
        if kept.iter().all(|k| iou(&k.bbox, &c.bbox) <= suppress_iou) {
            kept.push(c);
        }
    }
    DetectionResult { boxes: kept, ..detected }
}

struct CameraSetup {
    camera: CameraModel,
    map: RegionMap,
}

/// Mutable loop state: per-camera history and the global sharing list.
pub struct PipelineState {
    setups: Vec<CameraSetup>,
    history: BTreeMap<u32, DetectionResult>,
    last_tick: Option<u64>,
    pub sharing: SharingList,
    pub stats: SharingStats,
}

impl PipelineState {
    pub fn new(scene: &Scene, config: &PipelineConfig) -> Result<Self, PipelineError> {
        let mut cams: Vec<&CameraModel> = scene.cameras.iter().collect();
        cams.sort_by_key(|c| c.id);
        if let Some(n) = config.camera_count {
            if n > cams.len() {
                return Err(PipelineError::Config(format!(
                    "camera_count {n} exceeds the {} cameras in the scenario",
                    cams.len()
                )));
            }
            cams.truncate(n);
        }
        let setups = cams
            .into_iter()
            .map(|c| {
                let grid = BlockGrid::new(c.width, c.height, config.block_size)?;
                let map = partition(c, &scene.overlap, &scene.lanes_for(c), grid)
                    .map_err(|source| PipelineError::Region { camera: c.id, source })?;
                Ok(CameraSetup {
                    camera: c.clone(),
                    map,
                })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        Ok(Self {
            setups,
            history: BTreeMap::new(),
            last_tick: None,
            sharing: SharingList::new(config.sharing),
            stats: SharingStats::default(),
        })
    }

    pub fn region_maps(&self) -> impl Iterator<Item = &RegionMap> {
        self.setups.iter().map(|s| &s.map)
    }

    pub fn camera_ids(&self) -> Vec<u32> {
        self.setups.iter().map(|s| s.camera.id).collect()
    }
}

struct Offloaded {
    frame: crate::scene::Frame,
    filter: FilterOutput,
    detection: DetectionResult,
    payload_bytes: u64,
    full_bytes: u64,
}

fn history_boxes(state: &PipelineState, camera: u32) -> Vec<BBox> {
    state.history.get(&camera).map(|d| d.plain_boxes()).unwrap_or_default()
}

/// Advances the loop by one processed tick.
pub fn run_tick(
    state: &mut PipelineState,
    scene: &Scene,
    scheme: &SchemeConfig,
    config: &PipelineConfig,
    detector: &dyn Detector,
    tick: u64,
    seed: u64,
) -> Result<TickTrace, PipelineError> {
    let bank = &config.bank;
    let prev_tick = state.last_tick;
    if prev_tick.is_some_and(|p| p >= tick) {
        return Err(PipelineError::Config(format!("tick {tick} does not follow tick {}", prev_tick.unwrap())));
    }

    let offloaded: Vec<Offloaded> = state
        .setups
        .par_iter()
        .map(|s| {
            let cam = &s.camera;
            let grid = &s.map.grid;
            let scene_err = |source| PipelineError::Scene {
                camera: cam.id,
                tick,
                source,
            };
            let frame = scene.render(cam, tick).map_err(scene_err)?;
            let flow = match prev_tick {
                Some(p) => scene.flow_field(cam, p, tick).map_err(scene_err)?,
                None => FlowField::zeros(cam.id, tick, cam.width, cam.height),
            };
            let prev = history_boxes(state, cam.id);
            let filter_err = |source| PipelineError::Filter {
                camera: cam.id,
                tick,
                source,
            };
            let filter = match scheme.scheme {
                Scheme::Cevas | Scheme::NoShare | Scheme::NoSelect => {
                    filter_frame(&frame, &flow, &prev, &s.map, &scheme.thresholds, &config.payload)
                        .map_err(filter_err)?
                }
                Scheme::EaroLike => {
                    filter_frame_tracking(&frame, &flow, &prev, grid, &scheme.thresholds, &config.payload)
                        .map_err(filter_err)?
                }
                Scheme::FullOffload => filter_frame_full(grid, &config.payload),
            };
            let tier = match scheme.scheme {
                Scheme::Cevas | Scheme::NoShare => select_tier(mean_pairwise_iou(&prev), scheme.t_iou, bank),
                Scheme::NoSelect => bank.index_of(scheme.fixed_tier.as_deref().unwrap_or_default())?,
                Scheme::EaroLike => bank.middle(),
                Scheme::FullOffload => bank.most_accurate(),
            };
            let filtered = assemble_filtered(&frame, &filter, grid);
            let visible = visible_in_blocks(&frame.truth_boxes(), &filter.offload_blocks, grid);
            let detection = detector.detect(&bank.tiers[tier], &filtered, &visible, seed);
            Ok(Offloaded {
                payload_bytes: filter.filtered_payload_bytes,
                full_bytes: config.payload.full_frame_bytes(grid),
                frame,
                filter,
                detection,
            })
        })
        .collect::<Result<_, PipelineError>>()?;

    // Sharing updates, serialized in camera order.
    let mut match_events = Vec::new();
    if scheme.scheme.shares() {
        for (s, o) in state.setups.iter().zip(&offloaded) {
            let known: Vec<Option<u32>> = state
                .sharing
                .entries()
                .iter()
                .filter(|e| tick.saturating_sub(e.last_update_tick) <= config.sharing.staleness_horizon)
                .map(|e| e.origin_object_id)
                .collect();
            let report = state
                .sharing
                .update(&o.detection, &o.frame, &s.map, scheme.t_s, &s.camera);
            for ev in &report.events {
                let was_known = ev.object_id.is_some() && known.contains(&ev.object_id);
                match &ev.outcome {
                    MatchOutcome::Matched { entry_origin, .. } => {
                        state.stats.matches += 1;
                        let correct = ev.object_id.is_some() && *entry_origin == ev.object_id;
                        state.stats.correct_matches += correct as u64;
                        if was_known {
                            state.stats.known_observations += 1;
                            state.stats.known_matched_correctly += correct as u64;
                        }
                    }
                    MatchOutcome::Inserted { .. } => {
                        state.stats.inserts += 1;
                        state.stats.known_observations += was_known as u64;
                    }
                }
            }
            match_events.extend(report.events);
        }
    }

    // Edge server queue in camera order; each frame waits for the earlier inferences.
    let mut queue_wait = 0.0;
    let mut cameras = Vec::with_capacity(offloaded.len());
    for (s, o) in state.setups.iter().zip(offloaded) {
        let shared = if scheme.scheme.shares() {
            state.sharing.shared_results_for(&s.camera, &s.map, tick)
        } else {
            Vec::new()
        };
        let Offloaded {
            frame,
            filter,
            detection,
            payload_bytes,
            full_bytes,
        } = o;
        let inference_time = queue_wait + detection.inference_latency;
        queue_wait += detection.inference_latency;
        let latency = response_latency(
            filter_latency(filter.filter_compute_cost, config.filter_cost_per_unit),
            tx_latency(payload_bytes, &config.link),
            inference_time,
        );
        let reused = match scheme.scheme {
            Scheme::Cevas | Scheme::NoShare | Scheme::NoSelect => filter.reused_results.clone(),
            _ => Vec::new(),
        };
        let merged = merge_results(detection, &reused, &shared, config.merge_iou);
        let truth = frame.truth_boxes();
        let iou = (!truth.is_empty()).then(|| frame_iou(&merged.plain_boxes(), &truth));

        let mut history = merged.clone();
        if !config.shared_in_history {
            history.boxes.retain(|b| b.source != BoxSource::Shared);
        }
        state.history.insert(s.camera.id, history);

        cameras.push(CameraTrace {
            camera_id: s.camera.id,
            data_size_ratio: data_size_ratio(payload_bytes, full_bytes)?,
            filter,
            detection: merged,
            latency,
            truth_count: truth.len(),
            iou,
        });
    }

    let sharing_live_in_overlap = state.sharing.live_count_inside(&scene.overlap, tick);
    let truth_in_overlap = scene.vehicles_in_overlap(tick).len();
    if scheme.scheme.shares() && tick >= config.warmup_ticks {
        state.stats.checked_ticks += 1;
        state.stats.count_mismatch_ticks += (sharing_live_in_overlap != truth_in_overlap) as u64;
    }
    state.last_tick = Some(tick);
    Ok(TickTrace {
        tick,
        cameras,
        match_events,
        sharing_live_in_overlap,
        truth_in_overlap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub traces: Vec<TickTrace>,
    pub metrics: MetricsRecord,
}

/// Ticks processed under frame interval `n`.
pub fn processed_ticks(horizon: u64, n: u64) -> impl Iterator<Item = u64> {
    (0..horizon).step_by(n.max(1) as usize)
}

pub fn run_scenario(
    scene: &Scene,
    scheme: &SchemeConfig,
    config: &PipelineConfig,
    seed: u64,
) -> Result<ScenarioRun, PipelineError> {
    run_scenario_with(scene, scheme, config, &SyntheticDetector, seed)
}

pub fn run_scenario_with(
    scene: &Scene,
    scheme: &SchemeConfig,
    config: &PipelineConfig,
    detector: &dyn Detector,
    seed: u64,
) -> Result<ScenarioRun, PipelineError> {
    config.validate()?;
    scheme.validate(&config.bank)?;
    let mut state = PipelineState::new(scene, config)?;
    let mut traces = Vec::new();
    for tick in processed_ticks(scene.horizon(), scheme.frame_interval) {
        traces.push(run_tick(&mut state, scene, scheme, config, detector, tick, seed)?);
    }
    let metrics = aggregate(scheme.scheme, &traces, state.stats);
    Ok(ScenarioRun { traces, metrics })
}

pub fn aggregate(scheme: Scheme, traces: &[TickTrace], sharing: SharingStats) -> MetricsRecord {
    let frames: Vec<&CameraTrace> = traces.iter().flat_map(|t| &t.cameras).collect();
    let n = frames.len().max(1) as f64;
    let mean = |f: &dyn Fn(&CameraTrace) -> f64| frames.iter().map(|c| f(c)).sum::<f64>() / n;
    let ious: Vec<f64> = frames.iter().filter_map(|c| c.iou).collect();
    let mut tier_usage = BTreeMap::new();
    for c in &frames {
        *tier_usage.entry(c.detection.detector_used.clone()).or_insert(0) += 1;
    }
    MetricsRecord {
        scheme,
        camera_frames: frames.len() as u64,
        mean_iou: if ious.is_empty() {
            1.0
        } else {
            ious.iter().sum::<f64>() / ious.len() as f64
        },
        mean_data_size_ratio: mean(&|c| c.data_size_ratio),
        mean_latency: mean(&|c| c.latency.total),
        mean_filter_time: mean(&|c| c.latency.filter_time),
        mean_tx_time: mean(&|c| c.latency.tx_time),
        mean_inference_time: mean(&|c| c.latency.inference_time),
        mean_payload_bytes: mean(&|c| c.filter.filtered_payload_bytes as f64),
        tier_usage,
        sharing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn frame_iou_cases() {
        let t = vec![b(0.1, 0.1, 0.3, 0.3), b(0.6, 0.6, 0.8, 0.8)];
        assert_eq!(frame_iou(&t, &t), 1.0);
        assert_eq!(frame_iou(&[], &t), 0.0);
        assert_eq!(frame_iou(&[], &[]), 1.0);
        // matches truth 0 at IoU 0.8, truth 1 unmatched
        let p = b(0.1, 0.1, 0.3, 0.26);
        assert!((iou(&p, &t[0]) - 0.8).abs() < 1e-12);
        assert!((frame_iou(&[p], &t) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn merge_order_and_suppression() {
        let det = DetectionResult {
            camera_id: 0,
            tick: 1,
            boxes: vec![TaggedBox {
                bbox: b(0.1, 0.1, 0.3, 0.3),
                source: BoxSource::Detected,
            }],
            detector_used: "fast".into(),
            inference_latency: 0.1,
        };
        let reused = [b(0.1, 0.1, 0.3, 0.29), b(0.5, 0.5, 0.6, 0.6)];
        let shared = [b(0.5, 0.5, 0.6, 0.61), b(0.7, 0.7, 0.8, 0.8)];
        let m = merge_results(det, &reused, &shared, 0.5);
        let src: Vec<_> = m.boxes.iter().map(|t| t.source).collect();
        assert_eq!(src, vec![BoxSource::Detected, BoxSource::Reused, BoxSource::Shared]);
        assert_eq!(m.boxes[2].bbox, shared[1]);
        assert_eq!(m.inference_latency, 0.1);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<Scheme>(&json).unwrap(), s);
        }
        assert_eq!("earo_like".parse::<Scheme>().unwrap(), Scheme::EaroLike);
        assert!("bogus".parse::<Scheme>().is_err());
    }

    #[test]
    fn fixed_tier_only_for_noselect() {
        let bank = DetectorBank::default();
        for s in Scheme::ALL {
            SchemeConfig::new(s, 32, &bank).validate(&bank).unwrap();
        }
        let mut c = SchemeConfig::new(Scheme::Cevas, 32, &bank);
        c.fixed_tier = Some("fast".into());
        assert!(c.validate(&bank).is_err());
        let mut c = SchemeConfig::new(Scheme::NoSelect, 32, &bank);
        c.fixed_tier = None;
        assert!(c.validate(&bank).is_err());
        c.fixed_tier = Some("nope".into());
        assert!(c.validate(&bank).is_err());
        let mut c = SchemeConfig::new(Scheme::Cevas, 32, &bank);
        c.frame_interval = 0;
        assert!(c.validate(&bank).is_err());
    }

    #[test]
    fn processed_tick_schedule() {
        assert_eq!(processed_ticks(7, 1).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(processed_ticks(7, 3).collect::<Vec<_>>(), vec![0, 3, 6]);
    }
}
