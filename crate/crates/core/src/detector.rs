//! Detector bank and content-aware model selection.
//!
//! Detection is synthetic: each ground-truth object visible in the offloaded
//! blocks is missed with the tier's miss rate or reported with Gaussian
//! center/size noise. Every object draws from its own stream keyed by
//! `(seed, camera, tick, object)`, so two tiers run on the same input see
//! the same underlying random numbers and the more accurate tier's misses
//! are a subset of the faster tier's.
//!
//! Latency is modeled: `base_latency + per_block_latency * blocks`.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::FilteredFrame;
use crate::geometry::{iou, BBox, BlockGrid};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("detector bank needs at least three tiers, got {0}")]
    TooFewTiers(usize),
    #[error("tier `{name}`: {message}")]
    InvalidProfile { name: String, message: String },
    #[error("tiers must be ordered fast to accurate: `{slower}` is not slower and more accurate than `{faster}`")]
    Ordering { faster: String, slower: String },
    #[error("unknown tier `{0}`")]
    UnknownTier(String),
    #[error("calibration file {path}: {message}")]
    Calibration { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorProfile {
    pub name: String,
    pub base_latency: f64,
    pub per_block_latency: f64,
    pub center_noise_sigma: f64,
    pub size_noise_sigma: f64,
    pub miss_rate: f64,
}

impl DetectorProfile {
    pub fn validate(&self) -> Result<(), DetectorError> {
        let bad = |m: &str| DetectorError::InvalidProfile {
            name: self.name.clone(),
            message: m.to_string(),
        };
        if !(self.base_latency >= 0.0 && self.per_block_latency >= 0.0) {
            return Err(bad("latencies must be >= 0"));
        }
        if !(self.center_noise_sigma >= 0.0 && self.size_noise_sigma >= 0.0) {
            return Err(bad("noise sigmas must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.miss_rate) {
            return Err(bad("miss_rate must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn latency_for_blocks(&self, blocks: usize) -> f64 {
        self.base_latency + self.per_block_latency * blocks as f64
    }

    /// Profile that reports every visible object exactly.
    pub fn exact(name: &str) -> Self {
        Self {
            name: name.to_string(),
            base_latency: 0.0,
            per_block_latency: 0.0,
            center_noise_sigma: 0.0,
            size_noise_sigma: 0.0,
            miss_rate: 0.0,
        }
    }
}

/// Tiers ordered from fastest (index 0) to most accurate (last).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorBank {
    pub tiers: Vec<DetectorProfile>,
}

impl Default for DetectorBank {
    /// Three tiers whose full-frame (80 block) latencies are roughly
    /// 0.15 s, 0.21 s and 0.27 s.
    fn default() -> Self {
        Self {
            tiers: vec![
                DetectorProfile {
                    name: "fast".into(),
                    base_latency: 0.030,
                    per_block_latency: 0.0015,
                    center_noise_sigma: 3.0e-4,
                    size_noise_sigma: 3.0e-4,
                    miss_rate: 0.12,
                },
                DetectorProfile {
                    name: "medium".into(),
                    base_latency: 0.045,
                    per_block_latency: 0.0021,
                    center_noise_sigma: 2.0e-4,
                    size_noise_sigma: 2.0e-4,
                    miss_rate: 0.06,
                },
                DetectorProfile {
                    name: "accurate".into(),
                    base_latency: 0.060,
                    per_block_latency: 0.0026,
                    center_noise_sigma: 1.0e-4,
                    size_noise_sigma: 1.0e-4,
                    miss_rate: 0.02,
                },
            ],
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct CalibrationFile {
    tiers: Vec<DetectorProfile>,
}

impl DetectorBank {
    pub fn new(tiers: Vec<DetectorProfile>) -> Result<Self, DetectorError> {
        let bank = Self { tiers };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        if self.tiers.len() < 3 {
            return Err(DetectorError::TooFewTiers(self.tiers.len()));
        }
        for t in &self.tiers {
            t.validate()?;
        }
        for w in self.tiers.windows(2) {
            let (f, s) = (&w[0], &w[1]);
            let slower = s.base_latency >= f.base_latency
                && s.per_block_latency >= f.per_block_latency
                && (s.base_latency > f.base_latency || s.per_block_latency > f.per_block_latency);
            let more_accurate = s.miss_rate <= f.miss_rate
                && s.center_noise_sigma <= f.center_noise_sigma
                && s.size_noise_sigma <= f.size_noise_sigma
                && (s.miss_rate < f.miss_rate
                    || s.center_noise_sigma < f.center_noise_sigma
                    || s.size_noise_sigma < f.size_noise_sigma);
            if !(slower && more_accurate) {
                return Err(DetectorError::Ordering {
                    faster: f.name.clone(),
                    slower: s.name.clone(),
                });
            }
        }
        Ok(())
    }

    /// Reads a TOML calibration file of `[[tiers]]` tables, fast first.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, DetectorError> {
        let path = path.as_ref();
        let cal = |message: String| DetectorError::Calibration {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| cal(e.to_string()))?;
        let file: CalibrationFile = toml::from_str(&text).map_err(|e| cal(e.to_string()))?;
        Self::new(file.tiers)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&CalibrationFile {
            tiers: self.tiers.clone(),
        })
        .expect("bank serializes")
    }

    pub fn fastest(&self) -> usize {
        0
    }

    pub fn middle(&self) -> usize {
        self.tiers.len() / 2
    }

    pub fn most_accurate(&self) -> usize {
        self.tiers.len() - 1
    }

    pub fn index_of(&self, name: &str) -> Result<usize, DetectorError> {
        self.tiers
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| DetectorError::UnknownTier(name.to_string()))
    }

    /// Multiplies every latency constant by `factor`.
    pub fn scaled_latency(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.tiers {
            t.base_latency *= factor;
            t.per_block_latency *= factor;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxSource {
    Detected,
    Reused,
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedBox {
    pub bbox: BBox,
    pub source: BoxSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub camera_id: u32,
    pub tick: u64,
    pub boxes: Vec<TaggedBox>,
    pub detector_used: String,
    pub inference_latency: f64,
}

impl DetectionResult {
    pub fn empty(camera_id: u32, tick: u64) -> Self {
        Self {
            camera_id,
            tick,
            boxes: Vec::new(),
            detector_used: String::new(),
            inference_latency: 0.0,
        }
    }

    pub fn plain_boxes(&self) -> Vec<BBox> {
        self.boxes.iter().map(|b| b.bbox).collect()
    }

    pub fn boxes_from(&self, source: BoxSource) -> impl Iterator<Item = &BBox> {
        self.boxes
            .iter()
            .filter(move |b| b.source == source)
            .map(|b| &b.bbox)
    }
}

/// Ground-truth boxes with at least half of their pixels inside offloaded
/// blocks; only those are detectable.
pub fn visible_in_blocks(truth: &[BBox], blocks: &BTreeSet<usize>, grid: &BlockGrid) -> Vec<BBox> {
    truth
        .iter()
        .filter(|t| {
            let r = t.pixel_rect(grid.frame_width, grid.frame_height);
            let total = r.area();
            if total == 0 {
                return false;
            }
            let covered: u64 = grid
                .blocks_of_rect(&r)
                .into_iter()
                .filter(|k| blocks.contains(k))
                .map(|k| grid.block_rect(k).intersect(&r).area())
                .sum();
            covered * 2 >= total
        })
        .copied()
        .collect()
}

/// Pluggable detection backend.
pub trait Detector: Send + Sync {
    fn detect(
        &self,
        profile: &DetectorProfile,
        filtered: &FilteredFrame,
        truth_visible: &[BBox],
        seed: u64,
    ) -> DetectionResult;
}

/// Perturbs ground truth according to the profile's noise and miss rate.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticDetector;

fn object_stream(seed: u64, camera: u32, tick: u64, object: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&camera.to_le_bytes());
    key[12..20].copy_from_slice(&tick.to_le_bytes());
    key[20..24].copy_from_slice(&object.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

impl Detector for SyntheticDetector {
    fn detect(
        &self,
        profile: &DetectorProfile,
        filtered: &FilteredFrame,
        truth_visible: &[BBox],
        seed: u64,
    ) -> DetectionResult {
        let mut boxes = Vec::with_capacity(truth_visible.len());
        if !filtered.is_empty() {
            for (i, t) in truth_visible.iter().enumerate() {
                let object = t.object_id.unwrap_or(u32::MAX - i as u32);
                let mut rng = object_stream(seed, filtered.camera_id, filtered.tick, object);
                let u: f64 = rng.random();
                let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
                if u < profile.miss_rate {
                    continue;
                }
                let (cx, cy) = t.center();
                let w = (t.width() + profile.size_noise_sigma * z[2]).max(1e-6);
                let h = (t.height() + profile.size_noise_sigma * z[3]).max(1e-6);
                let cx = cx + profile.center_noise_sigma * z[0];
                let cy = cy + profile.center_noise_sigma * z[1];
                if let Ok(b) = BBox::from_center(cx, cy, w, h) {
                    let b = BBox {
                        object_id: t.object_id,
                        ..b
                    };
                    boxes.push(TaggedBox {
                        bbox: b.with_confidence(1.0 - profile.miss_rate),
                        source: BoxSource::Detected,
                    });
                }
            }
        }
        DetectionResult {
            camera_id: filtered.camera_id,
            tick: filtered.tick,
            boxes,
            detector_used: profile.name.clone(),
            inference_latency: profile.latency_for_blocks(filtered.blocks.len()),
        }
    }
}

/// Mean IoU over all unordered pairs; 0 for fewer than two boxes.
pub fn mean_pairwise_iou(boxes: &[BBox]) -> f64 {
    let n = boxes.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n - 1 {
        for j in i + 1..n {
            sum += iou(&boxes[i], &boxes[j]);
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

/// Tier index for a crowding score `m`: fastest at zero, most accurate
/// above `t_iou`, the middle tier otherwise.
pub fn select_tier(m: f64, t_iou: f64, bank: &DetectorBank) -> usize {
    if m == 0.0 {
        bank.fastest()
    } else if m > t_iou {
        bank.most_accurate()
    } else {
        bank.middle()
    }
}

pub fn select_model<'a>(prev: &DetectionResult, t_iou: f64, bank: &'a DetectorBank) -> &'a str {
    let m = mean_pairwise_iou(&prev.plain_boxes());
    &bank.tiers[select_tier(m, t_iou, bank)].name
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{assemble_filtered, FilterOutput};
    use crate::scene::Frame;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn filtered_with(blocks: &[usize]) -> FilteredFrame {
        let grid = BlockGrid::new(64, 64, 16).unwrap();
        let frame = Frame {
            camera_id: 2,
            tick: 9,
            width: 64,
            height: 64,
            pixels: vec![[0, 0, 0]; 64 * 64],
            ground_truth: vec![],
        };
        let out = FilterOutput {
            offload_blocks: blocks.iter().copied().collect(),
            ..FilterOutput::default()
        };
        assemble_filtered(&frame, &out, &grid)
    }

    #[test]
    fn default_bank_is_ordered() {
        let bank = DetectorBank::default();
        bank.validate().unwrap();
        let full: Vec<f64> = bank.tiers.iter().map(|t| t.latency_for_blocks(80)).collect();
        assert!(full[0] >= 0.14 && full[2] <= 0.28, "{full:?}");
    }

    #[test]
    fn misordered_bank_rejected() {
        let mut bank = DetectorBank::default();
        bank.tiers.swap(0, 2);
        assert!(matches!(bank.validate(), Err(DetectorError::Ordering { .. })));
        assert!(DetectorBank::new(bank.tiers[..2].to_vec()).is_err());
    }

    #[test]
    fn empty_frame_costs_base_latency() {
        let p = DetectorBank::default().tiers[1].clone();
        let truth = vec![b(0.1, 0.1, 0.2, 0.2).with_id(1)];
        let r = SyntheticDetector.detect(&p, &filtered_with(&[]), &truth, 1);
        assert!(r.boxes.is_empty());
        assert_eq!(r.inference_latency, p.base_latency);
    }

    #[test]
    fn exact_profile_returns_truth() {
        let p = DetectorProfile::exact("exact");
        let truth = vec![b(0.1, 0.1, 0.2, 0.2).with_id(1), b(0.5, 0.5, 0.9, 0.7).with_id(2)];
        let r = SyntheticDetector.detect(&p, &filtered_with(&[0, 5]), &truth, 1);
        let got: Vec<BBox> = r.plain_boxes();
        assert_eq!(got.len(), 2);
        for (g, t) in got.iter().zip(&truth) {
            assert!((g.x_min - t.x_min).abs() < 1e-15 && (g.y_max - t.y_max).abs() < 1e-15);
            assert_eq!(g.object_id, t.object_id);
        }
        assert!(r.boxes.iter().all(|t| t.source == BoxSource::Detected));
    }

    #[test]
    fn detection_is_deterministic() {
        let p = DetectorBank::default().tiers[0].clone();
        let truth: Vec<BBox> = (0..20)
            .map(|i| b(0.01 * i as f64, 0.1, 0.01 * i as f64 + 0.05, 0.2).with_id(i))
            .collect();
        let f = filtered_with(&[0]);
        let a = SyntheticDetector.detect(&p, &f, &truth, 42);
        let c = SyntheticDetector.detect(&p, &f, &truth, 42);
        assert_eq!(a, c);
        let d = SyntheticDetector.detect(&p, &f, &truth, 43);
        assert_ne!(a, d);
    }

    #[test]
    fn visibility_needs_half_the_box() {
        let grid = BlockGrid::new(64, 64, 16).unwrap();
        // 8 px wide box straddling blocks 0 and 1: 4 px in each
        let t = b(12.0 / 64.0, 2.0 / 64.0, 20.0 / 64.0, 10.0 / 64.0);
        let only0: BTreeSet<usize> = [0].into_iter().collect();
        assert_eq!(visible_in_blocks(&[t], &only0, &grid).len(), 1);
        let t = b(13.0 / 64.0, 2.0 / 64.0, 20.0 / 64.0, 10.0 / 64.0);
        assert!(visible_in_blocks(&[t], &only0, &grid).is_empty());
    }

    #[test]
    fn mean_pairwise_iou_cases() {
        assert_eq!(mean_pairwise_iou(&[]), 0.0);
        assert_eq!(mean_pairwise_iou(&[b(0.0, 0.0, 0.5, 0.5)]), 0.0);
        assert_eq!(mean_pairwise_iou(&[b(0.0, 0.0, 0.2, 0.2), b(0.5, 0.5, 0.9, 0.9)]), 0.0);
        // pairs: (a,c)=1/7, (a,d)=0, (c,d)=0
        let boxes = [
            b(0.0, 0.0, 0.5, 0.5),
            b(0.25, 0.25, 0.75, 0.75),
            b(0.8, 0.8, 0.95, 0.95),
        ];
        let hand = (1.0 / 7.0 + 0.0 + 0.0) / 3.0;
        assert!((mean_pairwise_iou(&boxes) - hand).abs() < 1e-12);
        assert!((hand - 0.047619).abs() < 1e-6);
        let mut rev = boxes;
        rev.reverse();
        assert!((mean_pairwise_iou(&rev) - hand).abs() < 1e-15);
    }

    #[test]
    fn tier_selection_branches() {
        let bank = DetectorBank::default();
        assert_eq!(select_tier(0.0, 0.2, &bank), 0);
        assert_eq!(select_tier(0.25, 0.2, &bank), 2);
        assert_eq!(select_tier(0.1, 0.2, &bank), 1);
        assert_eq!(select_tier(0.2, 0.2, &bank), 1);

        let mut prev = DetectionResult::empty(0, 0);
        assert_eq!(select_model(&prev, 0.2, &bank), "fast");
        for bb in [b(0.0, 0.0, 0.5, 0.5), b(0.1, 0.1, 0.6, 0.6)] {
            prev.boxes.push(TaggedBox {
                bbox: bb,
                source: BoxSource::Reused,
            });
        }
        assert_eq!(select_model(&prev, 0.2, &bank), "accurate");
    }

    #[test]
    fn tier_selection_is_similarity_invariant() {
        let bank = DetectorBank::default();
        let boxes = [b(0.1, 0.1, 0.3, 0.3), b(0.2, 0.15, 0.4, 0.35), b(0.5, 0.5, 0.6, 0.6)];
        let scaled: Vec<BBox> = boxes
            .iter()
            .map(|x| b(x.x_min * 0.5 + 0.2, x.y_min * 0.5 + 0.1, x.x_max * 0.5 + 0.2, x.y_max * 0.5 + 0.1))
            .collect();
        let m1 = mean_pairwise_iou(&boxes);
        let m2 = mean_pairwise_iou(&scaled);
        assert!((m1 - m2).abs() < 1e-12);
        assert_eq!(select_tier(m1, 0.2, &bank), select_tier(m2, 0.2, &bank));
    }

    #[test]
    fn calibration_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiers.toml");
        let bank = DetectorBank::default();
        std::fs::write(&path, bank.to_toml()).unwrap();
        assert_eq!(DetectorBank::from_file(&path).unwrap(), bank);
    }
}
