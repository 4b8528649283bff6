//! Edge-side sharing object manager.
//!
//! Objects detected inside the overlapping region are described by a mean
//! color and a pooled image patch, then matched against a global list of
//! sharing objects. A match within `t_s` refreshes the entry, anything else
//! becomes a new entry. Entries are kept on a common ground plane so their
//! results can be projected into every other camera.
//!
//! Concurrency contract: a [`SharingList`] has a single writer. All
//! [`SharingList::update`] calls for tick `t` must finish before any
//! [`SharingList::shared_results_for`] query for tick `t` is answered;
//! queries may run concurrently between updates.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{BoxSource, DetectionResult};
use crate::geometry::BBox;
use crate::region::{bbox_intersects_region, RegionLabel, RegionMap};
use crate::scene::{CameraModel, Frame, Polygon};

#[derive(Debug, Error, PartialEq)]
pub enum SharingError {
    #[error("box covers no pixels of the frame")]
    EmptyBox,
    #[error("feature dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch(PatchDims, PatchDims),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorFeature(pub [f64; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchDims {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for PatchDims {
    fn default() -> Self {
        Self {
            channels: 3,
            height: 8,
            width: 8,
        }
    }
}

impl PatchDims {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Channel-major `C x H x W` tensor with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchFeature {
    pub dims: PatchDims,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub color: ColorFeature,
    pub patch: PatchFeature,
}

impl Features {
    fn blend(&self, observed: &Features, weight_old: f64) -> Features {
        let w_new = 1.0 - weight_old;
        Features {
            color: ColorFeature(std::array::from_fn(|i| {
                weight_old * self.color.0[i] + w_new * observed.color.0[i]
            })),
            patch: PatchFeature {
                dims: self.patch.dims,
                data: self
                    .patch
                    .data
                    .iter()
                    .zip(&observed.patch.data)
                    .map(|(a, b)| weight_old * a + w_new * b)
                    .collect(),
            },
        }
    }
}

/// Overlap length of `[a0, a1)` and `[b0, b1)`.
fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Area-pooling weights from `n_in` unit cells onto `n_out` equal bins.
fn pool_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|j| {
            let (lo, hi) = (j as f64 * scale, (j + 1) as f64 * scale);
            (lo.floor() as usize..(hi.ceil() as usize).min(n_in))
                .map(|x| (x, overlap(lo, hi, x as f64, x as f64 + 1.0)))
                .filter(|(_, w)| *w > 0.0)
                .collect()
        })
        .collect()
}

/// Mean color and area-pooled patch of the pixels under `p`.
pub fn extract_features(p: &BBox, frame: &Frame, dims: PatchDims) -> Result<Features, SharingError> {
    let r = p.pixel_rect(frame.width, frame.height);
    if r.is_empty() {
        return Err(SharingError::EmptyBox);
    }
    let (cw, ch) = (r.width() as usize, r.height() as usize);
    let mut sum = [0u64; 3];
    for y in r.y0..r.y1 {
        for x in r.x0..r.x1 {
            let px = frame.pixel(x, y);
            for c in 0..3 {
                sum[c] += px[c] as u64;
            }
        }
    }
    let n = (cw * ch) as f64;
    let color = ColorFeature(sum.map(|s| s as f64 / n / 255.0));

    let wx = pool_weights(cw, dims.width);
    let wy = pool_weights(ch, dims.height);
    let mut data = vec![0.0; dims.len()];
    for (i, row_w) in wy.iter().enumerate() {
        for (j, col_w) in wx.iter().enumerate() {
            let mut acc = [0.0f64; 3];
            let mut total = 0.0;
            for &(yy, wyv) in row_w {
                for &(xx, wxv) in col_w {
                    let w = wyv * wxv;
                    let px = frame.pixel(r.x0 + xx as u32, r.y0 + yy as u32);
                    for c in 0..3 {
                        acc[c] += w * px[c] as f64;
                    }
                    total += w;
                }
            }
            for c in 0..dims.channels.min(3) {
                data[(c * dims.height + i) * dims.width + j] = acc[c] / total / 255.0;
            }
        }
    }
    Ok(Features {
        color,
        patch: PatchFeature { dims, data },
    })
}

/// Sum of the Euclidean distances between colors and between flattened patches.
pub fn feature_distance(a: &Features, b: &Features) -> Result<f64, SharingError> {
    if a.patch.dims != b.patch.dims || a.patch.data.len() != b.patch.data.len() {
        return Err(SharingError::DimensionMismatch(a.patch.dims, b.patch.dims));
    }
    let sq = |x: &[f64], y: &[f64]| -> f64 {
        x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
    };
    Ok(sq(&a.color.0, &b.color.0) + sq(&a.patch.data, &b.patch.data))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharingObject {
    pub sharing_id: u32,
    pub features: Features,
    /// Ground-plane point under the last observed box center.
    pub world_position: [f64; 2],
    /// Half extents of the last observed box on the ground plane.
    pub world_half_extent: [f64; 2],
    /// Last box reported by each camera, with the tick it was reported.
    pub last_bbox_per_camera: BTreeMap<u32, (BBox, u64)>,
    pub last_update_tick: u64,
    pub owner_camera_of_last_update: u32,
    /// Object id carried by the box that created the entry.
    pub origin_object_id: Option<u32>,
    features_before_last_update: Features,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MatchOutcome {
    Matched {
        sharing_id: u32,
        distance: f64,
        entry_origin: Option<u32>,
    },
    Inserted {
        sharing_id: u32,
        nearest: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchEvent {
    pub camera_id: u32,
    pub tick: u64,
    pub object_id: Option<u32>,
    pub outcome: MatchOutcome,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchReport {
    pub events: Vec<MatchEvent>,
    pub skipped_outside_overlap: usize,
    pub evicted: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharingParams {
    /// Entries not refreshed for more than this many ticks are evicted.
    pub staleness_horizon: u64,
    /// Weight of the stored features when blending in a match.
    pub blend_old: f64,
    pub patch: PatchDims,
}

impl Default for SharingParams {
    fn default() -> Self {
        Self {
            staleness_horizon: 10,
            blend_old: 0.5,
            patch: PatchDims::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SharingList {
    pub params: SharingParams,
    entries: Vec<SharingObject>,
    next_id: u32,
}

impl SharingList {
    pub fn new(params: SharingParams) -> Self {
        Self {
            params,
            entries: Vec::new(),
            next_id: 0,
        }
    }

    pub fn entries(&self) -> &[SharingObject] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn is_live(&self, e: &SharingObject, tick: u64) -> bool {
        tick.saturating_sub(e.last_update_tick) <= self.params.staleness_horizon
    }

    /// Live entries whose ground-plane position lies inside `polygon`.
    pub fn live_count_inside(&self, polygon: &Polygon, tick: u64) -> usize {
        self.entries
            .iter()
            .filter(|e| self.is_live(e, tick) && polygon.contains(e.world_position))
            .count()
    }

    pub fn evict_stale(&mut self, tick: u64) -> Vec<u32> {
        let horizon = self.params.staleness_horizon;
        let mut gone = Vec::new();
        self.entries.retain(|e| {
            let keep = tick.saturating_sub(e.last_update_tick) <= horizon;
            if !keep {
                gone.push(e.sharing_id);
            }
            keep
        });
        gone
    }

    /// Feeds one camera's detections into the list.
    ///
    /// Only detected boxes touching the camera's overlapping blocks are
    /// considered. Re-applying the same result at the same tick leaves the
    /// list unchanged.
    pub fn update(
        &mut self,
        result: &DetectionResult,
        frame: &Frame,
        map: &RegionMap,
        t_s: f64,
        camera: &CameraModel,
    ) -> MatchReport {
        let tick = result.tick;
        let mut report = MatchReport {
            evicted: self.evict_stale(tick),
            ..MatchReport::default()
        };
        for p in result.boxes_from(BoxSource::Detected) {
            if !bbox_intersects_region(p, map, RegionLabel::Overlapping) {
                report.skipped_outside_overlap += 1;
                continue;
            }
            let Ok(observed) = extract_features(p, frame, self.params.patch) else {
                continue;
            };
            let (world_position, world_half_extent) = ground_footprint(p, camera);

            let mut best: Option<(usize, f64)> = None;
            for (idx, e) in self.entries.iter().enumerate() {
                let Ok(s) = feature_distance(&observed, &e.features) else {
                    continue;
                };
                if best.is_none_or(|(_, b)| s < b) {
                    best = Some((idx, s));
                }
            }

            let outcome = match best {
                Some((idx, s)) if s < t_s => {
                    let blend_old = self.params.blend_old;
                    let e = &mut self.entries[idx];
                    let base = if e.last_update_tick == tick && e.owner_camera_of_last_update == camera.id {
                        e.features_before_last_update.clone()
                    } else {
                        e.features.clone()
                    };
                    e.features = base.blend(&observed, blend_old);
                    e.features_before_last_update = base;
                    e.world_position = world_position;
                    e.world_half_extent = world_half_extent;
                    e.last_bbox_per_camera.insert(camera.id, (*p, tick));
                    e.last_update_tick = e.last_update_tick.max(tick);
                    e.owner_camera_of_last_update = camera.id;
                    MatchOutcome::Matched {
                        sharing_id: e.sharing_id,
                        distance: s,
                        entry_origin: e.origin_object_id,
                    }
                }
                nearest => {
                    let sharing_id = self.next_id;
                    self.next_id += 1;
                    self.entries.push(SharingObject {
                        sharing_id,
                        features_before_last_update: observed.clone(),
                        features: observed,
                        world_position,
                        world_half_extent,
                        last_bbox_per_camera: [(camera.id, (*p, tick))].into_iter().collect(),
                        last_update_tick: tick,
                        owner_camera_of_last_update: camera.id,
                        origin_object_id: p.object_id,
                    });
                    MatchOutcome::Inserted {
                        sharing_id,
                        nearest: nearest.map(|(_, s)| s),
                    }
                }
            };
            report.events.push(MatchEvent {
                camera_id: camera.id,
                tick,
                object_id: p.object_id,
                outcome,
            });
        }
        report
    }

    /// Boxes of live sharing objects as seen by `camera`, excluding objects
    /// this camera itself reported at `tick`. Only objects whose projected
    /// center lands in one of the camera's overlapping blocks are returned.
    pub fn shared_results_for(&self, camera: &CameraModel, map: &RegionMap, tick: u64) -> Vec<BBox> {
        let mut out = Vec::new();
        for e in &self.entries {
            if !self.is_live(e, tick) {
                continue;
            }
            if e.last_bbox_per_camera.get(&camera.id).is_some_and(|(_, t)| *t == tick) {
                continue;
            }
            let [cx, cy] = e.world_position;
            let [hx, hy] = e.world_half_extent;
            let r = camera.project_bounds(&[
                [cx - hx, cy - hy],
                [cx + hx, cy - hy],
                [cx + hx, cy + hy],
                [cx - hx, cy + hy],
            ]);
            let (u, v) = ((r[0] + r[2]) / 2.0, (r[1] + r[3]) / 2.0);
            if !((0.0..1.0).contains(&u) && (0.0..1.0).contains(&v)) {
                continue;
            }
            let (px, py) = (
                (u * camera.width as f64) as u32,
                (v * camera.height as f64) as u32,
            );
            if map.label_at_pixel(px, py) != RegionLabel::Overlapping {
                continue;
            }
            if let Ok(b) = BBox::new(r[0], r[1], r[2], r[3]) {
                let b = match e.origin_object_id {
                    Some(id) => b.with_id(id),
                    None => b,
                };
                out.push(b);
            }
        }
        out
    }

    /// One line per entry, for debugging and trace dumps.
    pub fn trace_lines(&self, tick: u64) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let cams: Vec<String> = e.last_bbox_per_camera.keys().map(|c| c.to_string()).collect();
            let _ = writeln!(
                s,
                "tick={tick} sharing_id={} origin={} pos=({:.3},{:.3}) updated={} by={} cams={} live={}",
                e.sharing_id,
                e.origin_object_id.map_or("-".to_string(), |o| o.to_string()),
                e.world_position[0],
                e.world_position[1],
                e.last_update_tick,
                e.owner_camera_of_last_update,
                cams.join(","),
                self.is_live(e, tick),
            );
        }
        s
    }
}

/// Ground-plane center and half extents of a box seen by `camera`.
fn ground_footprint(p: &BBox, camera: &CameraModel) -> ([f64; 2], [f64; 2]) {
    let (u, v) = p.center();
    let center = camera.unproject([u, v]);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for corner in [
        [p.x_min, p.y_min],
        [p.x_max, p.y_min],
        [p.x_max, p.y_max],
        [p.x_min, p.y_max],
    ] {
        let w = camera.unproject(corner);
        for i in 0..2 {
            lo[i] = lo[i].min(w[i]);
            hi[i] = hi[i].max(w[i]);
        }
    }
    (center, [(hi[0] - lo[0]) / 2.0, (hi[1] - lo[1]) / 2.0])
}

/// Free-function form of [`SharingList::update`].
pub fn update_sharing(
    result: &DetectionResult,
    frame: &Frame,
    map: &RegionMap,
    list: &mut SharingList,
    t_s: f64,
    camera: &CameraModel,
) -> MatchReport {
    list.update(result, frame, map, t_s, camera)
}

pub fn shared_results_for(camera: &CameraModel, map: &RegionMap, list: &SharingList, tick: u64) -> Vec<BBox> {
    list.shared_results_for(camera, map, tick)
}
