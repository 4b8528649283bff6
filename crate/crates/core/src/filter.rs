//! Camera-side input filtering.
//!
//! Decides which blocks of the current frame are offloaded to the edge
//! server and which previous detections are carried forward without
//! re-detection:
//!
//! 1. every incoming or leaving block with more than `t_new` moving pixels
//!    is offloaded (new-object discovery);
//! 2. every previous box is shifted by its flow-derived motion offset; when
//!    the motion distance exceeds `t_dis`, or the shifted box touches an
//!    overlapping block, the blocks under the shifted box are offloaded,
//!    otherwise the shifted box is kept as this tick's result.
//!
//! Overlapping blocks never trigger new-object offloading on their own.
//! Distances are normalized (fractions of the frame), see [`crate::geometry`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{bbox_blocks, shift_bbox, BBox, BlockGrid, MotionOffset};
use crate::region::{bbox_intersects_region, RegionLabel, RegionMap};
use crate::scene::{FlowField, Frame};

/// Flow magnitude (pixels) above which a pixel counts as moving.
pub const FLOW_EPSILON: f32 = 1e-6;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("flow field {flow_w}x{flow_h} does not match frame {frame_w}x{frame_h}")]
    FlowMismatch {
        flow_w: u32,
        flow_h: u32,
        frame_w: u32,
        frame_h: u32,
    },
    #[error("region grid does not match frame {0}x{1}")]
    GridMismatch(u32, u32),
    #[error("invalid thresholds: {0}")]
    Thresholds(String),
    #[error("malformed filtered frame: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterThresholds {
    /// Moving-pixel count per block that flags a new object.
    pub t_new: f64,
    /// Normalized motion distance above which a box is re-detected.
    pub t_dis: f64,
}

impl FilterThresholds {
    /// Defaults: a quarter of a block's pixels, and a tenth of the frame.
    pub fn for_block_size(block_size: u32) -> Self {
        Self {
            t_new: (block_size as f64 * block_size as f64) / 4.0,
            t_dis: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if !(self.t_new >= 0.0 && self.t_new.is_finite()) {
            return Err(FilterError::Thresholds(format!("t_new = {}", self.t_new)));
        }
        if !(self.t_dis >= 0.0 && self.t_dis.is_finite()) {
            return Err(FilterError::Thresholds(format!("t_dis = {}", self.t_dis)));
        }
        Ok(())
    }
}

/// Converts offloaded pixels to payload bytes: 3 bytes per pixel times a
/// compression factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadModel {
    pub compression_factor: f64,
}

impl Default for PayloadModel {
    fn default() -> Self {
        Self {
            compression_factor: 1.0,
        }
    }
}

impl PayloadModel {
    pub fn bytes_for_pixels(&self, pixels: u64) -> u64 {
        (pixels as f64 * 3.0 * self.compression_factor).round() as u64
    }

    pub fn bytes_for_blocks(&self, blocks: &BTreeSet<usize>, grid: &BlockGrid) -> u64 {
        self.bytes_for_pixels(blocks.iter().map(|&k| grid.block_pixel_count(k)).sum())
    }

    pub fn full_frame_bytes(&self, grid: &BlockGrid) -> u64 {
        self.bytes_for_pixels(grid.frame_pixel_count())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FilterOutput {
    pub offload_blocks: BTreeSet<usize>,
    /// Shifted previous boxes kept as results without re-detection.
    pub reused_results: Vec<BBox>,
    /// Shifted previous boxes whose blocks were offloaded.
    pub offload_driving: Vec<BBox>,
    /// Previous boxes that left the frame when shifted.
    pub dropped: Vec<BBox>,
    pub filtered_payload_bytes: u64,
    /// Blocks examined plus boxes shifted.
    pub filter_compute_cost: u64,
}

pub fn count_active_flow(flow: &FlowField, k: usize, grid: &BlockGrid) -> usize {
    let r = grid.block_rect(k);
    let mut n = 0;
    for y in r.y0..r.y1 {
        let row = (y * flow.width) as usize;
        n += flow.vectors[row + r.x0 as usize..row + r.x1 as usize]
            .iter()
            .filter(|v| is_moving(v))
            .count();
    }
    n
}

fn is_moving(v: &[f32; 2]) -> bool {
    v[0].hypot(v[1]) > FLOW_EPSILON
}

/// Moving pixels of a flow field with the source position each one came from.
struct MovingPixels {
    width: f64,
    height: f64,
    /// `(source_x, source_y, flow_x, flow_y)`, source at the pixel center.
    pixels: Vec<(f64, f64, f64, f64)>,
}

impl MovingPixels {
    fn of(flow: &FlowField) -> Self {
        let mut pixels = Vec::new();
        for y in 0..flow.height {
            for x in 0..flow.width {
                let v = flow.at(x, y);
                if is_moving(&v) {
                    let (fx, fy) = (v[0] as f64, v[1] as f64);
                    pixels.push((x as f64 + 0.5 - fx, y as f64 + 0.5 - fy, fx, fy));
                }
            }
        }
        Self {
            width: flow.width as f64,
            height: flow.height as f64,
            pixels,
        }
    }

    fn offset(&self, p: &BBox) -> MotionOffset {
        let (x0, x1) = (p.x_min * self.width, p.x_max * self.width);
        let (y0, y1) = (p.y_min * self.height, p.y_max * self.height);
        let (mut sx, mut sy, mut n) = (0.0f64, 0.0f64, 0u64);
        for &(px, py, fx, fy) in &self.pixels {
            if px >= x0 && px < x1 && py >= y0 && py < y1 {
                sx += fx;
                sy += fy;
                n += 1;
            }
        }
        if n == 0 {
            return MotionOffset::default();
        }
        MotionOffset::new(sx / n as f64 / self.width, sy / n as f64 / self.height)
    }
}

/// Mean flow of the moving pixels whose content came from inside `p`, in
/// normalized units. The flow is anchored at the current frame, so a pixel
/// at `q` with flow `f` originated at `q - f`. Zero when nothing moved out
/// of the box.
pub fn motion_offset(flow: &FlowField, p: &BBox) -> MotionOffset {
    MovingPixels::of(flow).offset(p)
}

fn check_inputs(frame: &Frame, flow: &FlowField, grid: &BlockGrid) -> Result<(), FilterError> {
    if flow.width != frame.width || flow.height != frame.height {
        return Err(FilterError::FlowMismatch {
            flow_w: flow.width,
            flow_h: flow.height,
            frame_w: frame.width,
            frame_h: frame.height,
        });
    }
    if grid.frame_width != frame.width || grid.frame_height != frame.height {
        return Err(FilterError::GridMismatch(frame.width, frame.height));
    }
    Ok(())
}

pub fn filter_frame(
    frame: &Frame,
    flow: &FlowField,
    prev_results: &[BBox],
    map: &RegionMap,
    th: &FilterThresholds,
    payload: &PayloadModel,
) -> Result<FilterOutput, FilterError> {
    th.validate()?;
    let grid = &map.grid;
    check_inputs(frame, flow, grid)?;

    let mut out = FilterOutput::default();
    let mut scanned = 0u64;
    for (k, label) in map.labels().iter().enumerate() {
        if matches!(label, RegionLabel::Incoming | RegionLabel::Leaving) {
            scanned += 1;
            if count_active_flow(flow, k, grid) as f64 > th.t_new {
                out.offload_blocks.insert(k);
            }
        }
    }

    let moving = MovingPixels::of(flow);
    for p in prev_results {
        let offset = moving.offset(p);
        let Ok((shifted, d)) = shift_bbox(p, offset) else {
            out.dropped.push(*p);
            continue;
        };
        if d > th.t_dis || bbox_intersects_region(&shifted, map, RegionLabel::Overlapping) {
            out.offload_blocks.extend(bbox_blocks(&shifted, grid));
            out.offload_driving.push(shifted);
        } else {
            out.reused_results.push(shifted);
        }
    }

    out.filtered_payload_bytes = payload.bytes_for_blocks(&out.offload_blocks, grid);
    out.filter_compute_cost = scanned + prev_results.len() as u64;
    Ok(out)
}

/// Motion-vector RoI baseline: offload the blocks under every previous box
/// grown to cover its motion-shifted position, plus every block in the frame
/// with more than `t_new` moving pixels. Nothing is reused.
pub fn filter_frame_tracking(
    frame: &Frame,
    flow: &FlowField,
    prev_results: &[BBox],
    grid: &BlockGrid,
    th: &FilterThresholds,
    payload: &PayloadModel,
) -> Result<FilterOutput, FilterError> {
    th.validate()?;
    check_inputs(frame, flow, grid)?;
    let mut out = FilterOutput::default();
    for k in 0..grid.block_count() {
        if count_active_flow(flow, k, grid) as f64 > th.t_new {
            out.offload_blocks.insert(k);
        }
    }
    let moving = MovingPixels::of(flow);
    for p in prev_results {
        let grown = match shift_bbox(p, moving.offset(p)) {
            Ok((q, _)) => BBox {
                x_min: p.x_min.min(q.x_min),
                y_min: p.y_min.min(q.y_min),
                x_max: p.x_max.max(q.x_max),
                y_max: p.y_max.max(q.y_max),
                ..*p
            },
            Err(_) => *p,
        };
        out.offload_blocks.extend(bbox_blocks(&grown, grid));
        out.offload_driving.push(grown);
    }
    out.filtered_payload_bytes = payload.bytes_for_blocks(&out.offload_blocks, grid);
    out.filter_compute_cost = grid.block_count() as u64 + prev_results.len() as u64;
    Ok(out)
}

/// Every block, no filtering work.
pub fn filter_frame_full(grid: &BlockGrid, payload: &PayloadModel) -> FilterOutput {
    let offload_blocks: BTreeSet<usize> = (0..grid.block_count()).collect();
    FilterOutput {
        filtered_payload_bytes: payload.bytes_for_blocks(&offload_blocks, grid),
        offload_blocks,
        ..FilterOutput::default()
    }
}

/// The offloaded part of a frame: block manifest plus raw block pixels.
///
/// Wire layout, all integers little-endian:
///
/// | field        | type          |
/// |--------------|---------------|
/// | magic        | `b"CVFF"`     |
/// | version      | u16 (= 1)     |
/// | camera id    | u32           |
/// | tick         | u64           |
/// | frame width  | u32           |
/// | frame height | u32           |
/// | block size   | u32           |
/// | block count  | u32           |
/// | block index  | u32 x count, ascending |
/// | pixels       | per block in manifest order, row-major RGB u8 over the block's (possibly partial) rectangle |
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredFrame {
    pub camera_id: u32,
    pub tick: u64,
    pub grid: BlockGrid,
    pub blocks: Vec<u32>,
    pub data: Vec<u8>,
}

const MAGIC: &[u8; 4] = b"CVFF";
const VERSION: u16 = 1;

impl FilteredFrame {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn pixel_bytes(&self) -> usize {
        self.data.len()
    }

    pub fn block_set(&self) -> BTreeSet<usize> {
        self.blocks.iter().map(|&k| k as usize).collect()
    }

    /// RGB bytes of block `k` if it was offloaded.
    pub fn block_pixels(&self, k: usize) -> Option<&[u8]> {
        let pos = self.blocks.iter().position(|&b| b as usize == k)?;
        let start: u64 = self.blocks[..pos]
            .iter()
            .map(|&b| self.grid.block_pixel_count(b as usize) * 3)
            .sum();
        let len = self.grid.block_pixel_count(k) * 3;
        Some(&self.data[start as usize..(start + len) as usize])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(36 + self.blocks.len() * 4 + self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.camera_id.to_le_bytes());
        out.extend_from_slice(&self.tick.to_le_bytes());
        out.extend_from_slice(&self.grid.frame_width.to_le_bytes());
        out.extend_from_slice(&self.grid.frame_height.to_le_bytes());
        out.extend_from_slice(&self.grid.block_size.to_le_bytes());
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for b in &self.blocks {
            out.extend_from_slice(&b.to_le_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FilterError> {
        let err = |m: &str| FilterError::Decode(m.to_string());
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4).ok_or_else(|| err("truncated magic"))? != MAGIC {
            return Err(err("bad magic"));
        }
        let version = u16::from_le_bytes(cur.array().ok_or_else(|| err("truncated version"))?);
        if version != VERSION {
            return Err(FilterError::Decode(format!("unsupported version {version}")));
        }
        let camera_id = cur.u32().ok_or_else(|| err("truncated header"))?;
        let tick = u64::from_le_bytes(cur.array().ok_or_else(|| err("truncated header"))?);
        let w = cur.u32().ok_or_else(|| err("truncated header"))?;
        let h = cur.u32().ok_or_else(|| err("truncated header"))?;
        let bs = cur.u32().ok_or_else(|| err("truncated header"))?;
        let grid = BlockGrid::new(w, h, bs).map_err(|e| FilterError::Decode(e.to_string()))?;
        let count = cur.u32().ok_or_else(|| err("truncated header"))? as usize;
        let mut blocks = Vec::with_capacity(count.min(grid.block_count()));
        let mut expected = 0u64;
        for _ in 0..count {
            let k = cur.u32().ok_or_else(|| err("truncated manifest"))?;
            if k as usize >= grid.block_count() {
                return Err(FilterError::Decode(format!("block index {k} out of range")));
            }
            if blocks.last().is_some_and(|&last| last >= k) {
                return Err(err("manifest not strictly ascending"));
            }
            expected += grid.block_pixel_count(k as usize) * 3;
            blocks.push(k);
        }
        let data = cur.rest().to_vec();
        if data.len() as u64 != expected {
            return Err(FilterError::Decode(format!(
                "pixel section has {} bytes, manifest implies {expected}",
                data.len()
            )));
        }
        Ok(Self {
            camera_id,
            tick,
            grid,
            blocks,
            data,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn array<const N: usize>(&mut self) -> Option<[u8; N]> {
        self.take(N).map(|s| s.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Option<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        s
    }
}

pub fn assemble_filtered(frame: &Frame, out: &FilterOutput, grid: &BlockGrid) -> FilteredFrame {
    let mut data = Vec::with_capacity(
        out.offload_blocks
            .iter()
            .map(|&k| grid.block_pixel_count(k) as usize * 3)
            .sum(),
    );
    for &k in &out.offload_blocks {
        let r = grid.block_rect(k);
        for y in r.y0..r.y1 {
            for x in r.x0..r.x1 {
                data.extend_from_slice(&frame.pixel(x, y));
            }
        }
    }
    FilteredFrame {
        camera_id: frame.camera_id,
        tick: frame.tick,
        grid: *grid,
        blocks: out.offload_blocks.iter().map(|&k| k as u32).collect(),
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::RegionMap;

    const W: u32 = 64;
    const H: u32 = 64;

    fn grid() -> BlockGrid {
        BlockGrid::new(W, H, 32).unwrap()
    }

    fn frame() -> Frame {
        Frame {
            camera_id: 0,
            tick: 1,
            width: W,
            height: H,
            pixels: (0..W * H).map(|i| [(i % 251) as u8, (i / 64) as u8, 7]).collect(),
            ground_truth: vec![],
        }
    }

    fn fill(flow: &mut FlowField, r: (u32, u32, u32, u32), v: [f32; 2]) {
        for y in r.1..r.3 {
            for x in r.0..r.2 {
                flow.vectors[(y * W + x) as usize] = v;
            }
        }
    }

    fn px_box(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
        BBox::new(
            x0 as f64 / W as f64,
            y0 as f64 / H as f64,
            x1 as f64 / W as f64,
            y1 as f64 / H as f64,
        )
        .unwrap()
    }

    fn labels(l: [RegionLabel; 4]) -> RegionMap {
        RegionMap::from_labels(0, grid(), l.to_vec()).unwrap()
    }

    use RegionLabel::*;

    #[test]
    fn active_flow_counts() {
        let g = grid();
        let mut flow = FlowField::zeros(0, 1, W, H);
        assert_eq!(count_active_flow(&flow, 0, &g), 0);
        fill(&mut flow, (0, 0, 32, 32), [1.0, 0.0]);
        assert_eq!(count_active_flow(&flow, 0, &g), 1024);
        // left half of block 1
        fill(&mut flow, (32, 0, 48, 32), [0.0, -2.0]);
        let oracle = (32..64)
            .flat_map(|x| (0..32).map(move |y| (x, y)))
            .filter(|&(x, y)| flow.at(x, y) != [0.0, 0.0])
            .count();
        assert_eq!(count_active_flow(&flow, 1, &g), oracle);
        assert_eq!(oracle, 512);
    }

    #[test]
    fn static_scene_empty_history() {
        let flow = FlowField::zeros(0, 1, W, H);
        let map = labels([Incoming, Leaving, Overlapping, Background]);
        let th = FilterThresholds::for_block_size(32);
        let out = filter_frame(&frame(), &flow, &[], &map, &th, &PayloadModel::default()).unwrap();
        assert!(out.offload_blocks.is_empty());
        assert!(out.reused_results.is_empty());
        assert_eq!(out.filtered_payload_bytes, 0);
        assert_eq!(out.filter_compute_cost, 2);
    }

    #[test]
    fn stationary_box_outside_overlap_is_reused() {
        let flow = FlowField::zeros(0, 1, W, H);
        let map = labels([Incoming, Leaving, Overlapping, Background]);
        let th = FilterThresholds::for_block_size(32);
        let p = px_box(4, 4, 20, 20).with_id(3);
        let out = filter_frame(&frame(), &flow, &[p], &map, &th, &PayloadModel::default()).unwrap();
        assert!(out.offload_blocks.is_empty());
        assert_eq!(out.reused_results, vec![p]);
    }

    #[test]
    fn stationary_box_in_overlap_is_offloaded() {
        let flow = FlowField::zeros(0, 1, W, H);
        let map = labels([Incoming, Leaving, Overlapping, Background]);
        let th = FilterThresholds::for_block_size(32);
        // bottom-left block is overlapping
        let p = px_box(4, 36, 20, 50);
        let out = filter_frame(&frame(), &flow, &[p], &map, &th, &PayloadModel::default()).unwrap();
        assert_eq!(out.offload_blocks.iter().copied().collect::<Vec<_>>(), vec![2]);
        assert!(out.reused_results.is_empty());
        assert_eq!(out.offload_driving.len(), 1);
    }

    #[test]
    fn fast_box_is_offloaded_at_shifted_position() {
        let mut flow = FlowField::zeros(0, 1, W, H);
        // content of x 4..20 moved 30 px right: 30/64 > 0.1
        fill(&mut flow, (34, 4, 50, 20), [30.0, 0.0]);
        let map = labels([Background; 4]);
        let th = FilterThresholds::for_block_size(32);
        let p = px_box(4, 4, 20, 20);
        assert_eq!(motion_offset(&flow, &p), MotionOffset::new(30.0 / 64.0, 0.0));
        let out = filter_frame(&frame(), &flow, &[p], &map, &th, &PayloadModel::default()).unwrap();
        assert_eq!(out.offload_blocks.iter().copied().collect::<Vec<_>>(), vec![1]);
        assert_eq!(out.offload_driving, vec![px_box(34, 4, 50, 20)]);

        // a box over the destination did not originate the motion
        let q = px_box(34, 4, 50, 20);
        assert_eq!(motion_offset(&flow, &q), MotionOffset::default());
        let out = filter_frame(&frame(), &flow, &[q], &map, &th, &PayloadModel::default()).unwrap();
        assert!(out.offload_blocks.is_empty());
        assert_eq!(out.reused_results, vec![q]);
    }

    #[test]
    fn offset_averages_only_pixels_from_the_box() {
        let mut flow = FlowField::zeros(0, 1, W, H);
        fill(&mut flow, (10, 10, 20, 20), [4.0, 0.0]);
        fill(&mut flow, (40, 40, 50, 50), [-2.0, 6.0]);
        let p = px_box(4, 8, 18, 22);
        // oracle: scan every pixel and test its source against the box
        let (mut sx, mut n) = (0.0, 0);
        for y in 0..H {
            for x in 0..W {
                let v = flow.at(x, y);
                let src = (x as f64 + 0.5 - v[0] as f64, y as f64 + 0.5 - v[1] as f64);
                if v != [0.0, 0.0] && src.0 >= 4.0 && src.0 < 18.0 && src.1 >= 8.0 && src.1 < 22.0 {
                    sx += v[0] as f64;
                    n += 1;
                }
            }
        }
        assert_eq!(n, 100);
        let o = motion_offset(&flow, &p);
        assert!((o.x - sx / n as f64 / 64.0).abs() < 1e-15);
        assert_eq!(o.y, 0.0);
    }

    #[test]
    fn new_object_needs_more_than_quarter_block() {
        let map = labels([Incoming, Leaving, Overlapping, Background]);
        let th = FilterThresholds::for_block_size(32);
        let mut flow = FlowField::zeros(0, 1, W, H);
        fill(&mut flow, (0, 0, 16, 16), [1.0, 1.0]); // exactly 256
        let out = filter_frame(&frame(), &flow, &[], &map, &th, &PayloadModel::default()).unwrap();
        assert!(out.offload_blocks.is_empty());
        fill(&mut flow, (16, 0, 17, 1), [1.0, 1.0]); // 257
        // motion in overlapping and background blocks never triggers
        fill(&mut flow, (0, 32, 64, 64), [1.0, 1.0]);
        let out = filter_frame(&frame(), &flow, &[], &map, &th, &PayloadModel::default()).unwrap();
        assert_eq!(out.offload_blocks.iter().copied().collect::<Vec<_>>(), vec![0]);
        assert_eq!(out.filtered_payload_bytes, 1024 * 3);
    }

    #[test]
    fn content_that_left_the_frame_leaves_the_box_in_place() {
        // nothing in the current frame came from the box, so it has no
        // supporting motion
        let flow = FlowField::zeros(0, 1, W, H);
        let map = labels([Background; 4]);
        let th = FilterThresholds::for_block_size(32);
        let p = px_box(54, 54, 64, 64);
        let out = filter_frame(&frame(), &flow, &[p], &map, &th, &PayloadModel::default()).unwrap();
        assert!(out.dropped.is_empty());
        assert_eq!(out.reused_results, vec![p]);
    }

    #[test]
    fn mismatched_flow_rejected() {
        let flow = FlowField::zeros(0, 1, 32, 32);
        let map = labels([Background; 4]);
        let th = FilterThresholds::for_block_size(32);
        assert!(filter_frame(&frame(), &flow, &[], &map, &th, &PayloadModel::default()).is_err());
        let bad = FilterThresholds { t_new: -1.0, t_dis: 0.1 };
        let flow = FlowField::zeros(0, 1, W, H);
        assert!(filter_frame(&frame(), &flow, &[], &map, &bad, &PayloadModel::default()).is_err());
    }

    #[test]
    fn assemble_and_roundtrip() {
        let g = grid();
        let f = frame();
        let empty = assemble_filtered(&f, &FilterOutput::default(), &g);
        assert!(empty.is_empty() && empty.pixel_bytes() == 0);

        let all = filter_frame_full(&g, &PayloadModel::default());
        let full = assemble_filtered(&f, &all, &g);
        assert_eq!(full.pixel_bytes() as u64, all.filtered_payload_bytes);
        assert_eq!(all.filtered_payload_bytes, PayloadModel::default().full_frame_bytes(&g));

        let some = FilterOutput {
            offload_blocks: [1usize, 3].into_iter().collect(),
            ..FilterOutput::default()
        };
        let ff = assemble_filtered(&f, &some, &g);
        let back = FilteredFrame::from_bytes(&ff.to_bytes()).unwrap();
        assert_eq!(back, ff);
        let b3 = back.block_pixels(3).unwrap();
        assert_eq!(&b3[..3], &f.pixel(32, 32));
        assert!(back.block_pixels(0).is_none());
        assert!(FilteredFrame::from_bytes(&ff.to_bytes()[..20]).is_err());
    }

    #[test]
    fn ten_of_hundred_blocks_is_ten_percent() {
        let g = BlockGrid::new(320, 320, 32).unwrap();
        let p = PayloadModel::default();
        let blocks: BTreeSet<usize> = (0..10).collect();
        assert_eq!(p.bytes_for_blocks(&blocks, &g) * 10, p.full_frame_bytes(&g));
    }
}
