//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's filtering or matching code; the
//! library is only used for its data types.

#![allow(dead_code)]

use std::collections::BTreeSet;

use coopvision::filter::{filter_frame, FilterThresholds, PayloadModel};
use coopvision::geometry::{iou, BBox, BlockGrid};
use coopvision::region::{RegionLabel, RegionMap};
use coopvision::scene::{FlowField, Frame};
use coopvision::sharing::{ColorFeature, Features, PatchDims, PatchFeature};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct FilterCase {
    pub width: u32,
    pub height: u32,
    pub block_size: u32,
    pub labels: Vec<RegionLabel>,
    pub flow: Vec<[f32; 2]>,
    pub prev: Vec<BBox>,
    pub t_new: f64,
    pub t_dis: f64,
}

#[derive(Debug, PartialEq)]
pub struct OracleOutput {
    pub offload: BTreeSet<usize>,
    pub reused: Vec<BBox>,
    pub driving: Vec<BBox>,
    pub dropped: Vec<BBox>,
}

/// Random scene: up to 16x16 blocks, up to 5 previous boxes, flow made of
/// translated rectangles plus stray moving pixels.
pub fn random_filter_case(rng: &mut ChaCha8Rng) -> FilterCase {
    let block_size = *[4u32, 6, 8, 10].get(rng.random_range(0..4)).unwrap();
    let cols = rng.random_range(1..=16u32);
    let rows = rng.random_range(1..=16u32);
    // Frames may end in partial blocks.
    let width = (cols * block_size).saturating_sub(rng.random_range(0..block_size)).max(1);
    let height = (rows * block_size).saturating_sub(rng.random_range(0..block_size)).max(1);
    let cols = width.div_ceil(block_size);
    let rows = height.div_ceil(block_size);
    let labels = (0..cols * rows)
        .map(|_| match rng.random_range(0..4) {
            0 => RegionLabel::Background,
            1 => RegionLabel::Incoming,
            2 => RegionLabel::Leaving,
            _ => RegionLabel::Overlapping,
        })
        .collect();

    let mut flow = vec![[0.0f32; 2]; (width * height) as usize];
    let mut sources = Vec::new();
    for _ in 0..rng.random_range(0..4) {
        let (w, h) = (rng.random_range(1..=width), rng.random_range(1..=height));
        let (x0, y0) = (rng.random_range(0..=width - w), rng.random_range(0..=height - h));
        let f = [rng.random_range(-6.0..6.0f32), rng.random_range(-6.0..6.0f32)];
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                flow[(y * width + x) as usize] = f;
            }
        }
        sources.push((x0 as f64 - f[0] as f64, y0 as f64 - f[1] as f64, w as f64, h as f64));
    }
    for _ in 0..rng.random_range(0..20) {
        let i = rng.random_range(0..flow.len());
        flow[i] = [rng.random_range(-3.0..3.0f32), rng.random_range(-3.0..3.0f32)];
    }

    let (wf, hf) = (width as f64, height as f64);
    let mut prev = Vec::new();
    for _ in 0..rng.random_range(0..=5) {
        let b = if !sources.is_empty() && rng.random_bool(0.6) {
            // Around where a moving rectangle came from.
            let (sx, sy, w, h) = sources[rng.random_range(0..sources.len())];
            let j = |r: &mut ChaCha8Rng| r.random_range(-2.0..2.0);
            BBox::new(
                (sx + j(rng)) / wf,
                (sy + j(rng)) / hf,
                (sx + w + j(rng)) / wf,
                (sy + h + j(rng)) / hf,
            )
        } else {
            let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
            let (c, d) = (rng.random::<f64>(), rng.random::<f64>());
            BBox::new(a.min(b), c.min(d), a.max(b), c.max(d))
        };
        if let Ok(b) = b {
            prev.push(b);
        }
    }
    let bs2 = (block_size * block_size) as f64;
    let t_new = if rng.random_bool(0.5) { bs2 / 4.0 } else { rng.random_range(0.0..bs2) };
    let t_dis = if rng.random_bool(0.5) { 0.1 } else { rng.random_range(0.0..0.3) };
    FilterCase {
        width,
        height,
        block_size,
        labels,
        flow,
        prev,
        t_new,
        t_dis,
    }
}

/// The input filtering policy written out step by step over raw pixels.
pub fn literal_filter(c: &FilterCase) -> OracleOutput {
    let (w, h, bs) = (c.width as usize, c.height as usize, c.block_size as usize);
    let cols = w.div_ceil(bs);
    let block_of = |x: usize, y: usize| (y / bs) * cols + x / bs;
    let moving = |v: [f32; 2]| (v[0] as f64).hypot(v[1] as f64) > 1e-6;

    // New objects: incoming or leaving blocks with more than t_new moving pixels.
    let mut offload = BTreeSet::new();
    let mut n = vec![0usize; c.labels.len()];
    for y in 0..h {
        for x in 0..w {
            if moving(c.flow[y * w + x]) {
                n[block_of(x, y)] += 1;
            }
        }
    }
    for (k, label) in c.labels.iter().enumerate() {
        if matches!(label, RegionLabel::Incoming | RegionLabel::Leaving) && n[k] as f64 > c.t_new {
            offload.insert(k);
        }
    }

    let (wf, hf) = (w as f64, h as f64);
    let (mut reused, mut driving, mut dropped) = (Vec::new(), Vec::new(), Vec::new());
    for p in &c.prev {
        // Mean flow of pixels whose content started inside p.
        let (mut sx, mut sy, mut cnt) = (0.0f64, 0.0f64, 0u64);
        for y in 0..h {
            for x in 0..w {
                let v = c.flow[y * w + x];
                if !moving(v) {
                    continue;
                }
                let (ox, oy) = (x as f64 + 0.5 - v[0] as f64, y as f64 + 0.5 - v[1] as f64);
                if ox >= p.x_min * wf && ox < p.x_max * wf && oy >= p.y_min * hf && oy < p.y_max * hf {
                    sx += v[0] as f64;
                    sy += v[1] as f64;
                    cnt += 1;
                }
            }
        }
        let (dx, dy) = if cnt == 0 {
            (0.0, 0.0)
        } else {
            (sx / cnt as f64 / wf, sy / cnt as f64 / hf)
        };
        let cl = |v: f64| v.clamp(0.0, 1.0);
        let q = [cl(p.x_min + dx), cl(p.y_min + dy), cl(p.x_max + dx), cl(p.y_max + dy)];
        let shifted = BBox {
            x_min: q[0],
            y_min: q[1],
            x_max: q[2],
            y_max: q[3],
            ..*p
        };
        if !(q[0] < q[2] && q[1] < q[3]) {
            dropped.push(*p);
            continue;
        }
        let d = (dx * dx + dy * dy).sqrt();
        // Blocks holding a pixel whose center lies in the shifted box.
        let mut blocks = BTreeSet::new();
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                if px >= q[0] * wf && px < q[2] * wf && py >= q[1] * hf && py < q[3] * hf {
                    blocks.insert(block_of(x, y));
                }
            }
        }
        let touches_overlap = blocks.iter().any(|&k| c.labels[k] == RegionLabel::Overlapping);
        if d > c.t_dis || touches_overlap {
            offload.extend(blocks);
            driving.push(shifted);
        } else {
            reused.push(shifted);
        }
    }
    OracleOutput {
        offload,
        reused,
        driving,
        dropped,
    }
}

fn close(a: &[BBox], b: &[BBox]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(p, q)| {
            (p.x_min - q.x_min).abs() < 1e-12
                && (p.y_min - q.y_min).abs() < 1e-12
                && (p.x_max - q.x_max).abs() < 1e-12
                && (p.y_max - q.y_max).abs() < 1e-12
        })
}

/// Runs the library filter on `c` and compares it with the literal version.
pub fn check_filter_case(c: &FilterCase) -> Result<(), String> {
    let grid = BlockGrid::new(c.width, c.height, c.block_size).map_err(|e| e.to_string())?;
    let map = RegionMap::from_labels(0, grid, c.labels.clone()).map_err(|e| e.to_string())?;
    let frame = Frame {
        camera_id: 0,
        tick: 1,
        width: c.width,
        height: c.height,
        pixels: vec![[0, 0, 0]; (c.width * c.height) as usize],
        ground_truth: vec![],
    };
    let flow = FlowField {
        camera_id: 0,
        tick: 1,
        width: c.width,
        height: c.height,
        vectors: c.flow.clone(),
    };
    let th = FilterThresholds {
        t_new: c.t_new,
        t_dis: c.t_dis,
    };
    let got = filter_frame(&frame, &flow, &c.prev, &map, &th, &PayloadModel::default()).map_err(|e| e.to_string())?;
    let want = literal_filter(c);
    if got.offload_blocks != want.offload {
        return Err(format!("offload {:?} vs oracle {:?}", got.offload_blocks, want.offload));
    }
    if !close(&got.reused_results, &want.reused) {
        return Err(format!("reused {:?} vs oracle {:?}", got.reused_results, want.reused));
    }
    if !close(&got.offload_driving, &want.driving) {
        return Err(format!("driving {:?} vs oracle {:?}", got.offload_driving, want.driving));
    }
    if got.dropped != want.dropped {
        return Err(format!("dropped {:?} vs oracle {:?}", got.dropped, want.dropped));
    }
    Ok(())
}

/// Runs `n` random cases from `seed`; returns how many agreed and the first
/// disagreement.
pub fn filter_agreement(seed: u64, n: usize) -> (usize, Option<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    let mut first = None;
    for i in 0..n {
        let c = random_filter_case(&mut rng);
        match check_filter_case(&c) {
            Ok(()) => ok += 1,
            Err(e) => {
                first.get_or_insert(format!("case {i}: {e}"));
            }
        }
    }
    (ok, first)
}

/// Best one-to-one assignment score by trying every assignment.
pub fn exhaustive_frame_iou(pred: &[BBox], truth: &[BBox]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    fn go(t: usize, pred: &[BBox], truth: &[BBox], used: &mut Vec<bool>) -> f64 {
        if t == truth.len() {
            return 0.0;
        }
        // Leave truth t unmatched.
        let mut best = go(t + 1, pred, truth, used);
        for i in 0..pred.len() {
            if !used[i] {
                used[i] = true;
                best = best.max(iou(&pred[i], &truth[t]) + go(t + 1, pred, truth, used));
                used[i] = false;
            }
        }
        best
    }
    go(0, pred, truth, &mut vec![false; pred.len()]) / truth.len() as f64
}

pub fn random_box(rng: &mut ChaCha8Rng) -> BBox {
    loop {
        let (cx, cy) = (rng.random::<f64>(), rng.random::<f64>());
        let (w, h) = (rng.random_range(0.02..0.4), rng.random_range(0.02..0.4));
        if let Ok(b) = BBox::from_center(cx, cy, w, h) {
            return b;
        }
    }
}

pub fn random_features(rng: &mut ChaCha8Rng) -> Features {
    let dims = PatchDims::default();
    Features {
        color: ColorFeature(std::array::from_fn(|_| rng.random())),
        patch: PatchFeature {
            dims,
            data: (0..dims.channels * dims.height * dims.width).map(|_| rng.random()).collect(),
        },
    }
}

/// R^2 of the least-squares line through `(x, y)`.
pub fn linear_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}
