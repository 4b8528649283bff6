//! Static per-camera partition of the block grid into background,
//! incoming, leaving and overlapping blocks.
//!
//! A block takes the label of the ground-plane point under its center
//! pixel. The overlap polygon wins over lane strips, and incoming strips win
//! over leaving strips when declarations overlap. This is a center-sample
//! approximation, not an area vote.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{bbox_blocks, BBox, BlockGrid, GeometryError};
use crate::scene::{CameraModel, Lane, LaneKind, Polygon};

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("camera {0} has a degenerate view transform")]
    DegenerateTransform(u32),
    #[error("grid {grid_w}x{grid_h} does not match camera resolution {cam_w}x{cam_h}")]
    GridMismatch {
        grid_w: u32,
        grid_h: u32,
        cam_w: u32,
        cam_h: u32,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    Background,
    Incoming,
    Leaving,
    Overlapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub camera_id: u32,
    pub grid: BlockGrid,
    labels: Vec<RegionLabel>,
}

impl RegionMap {
    /// Map with every block set to `label`.
    pub fn uniform(camera_id: u32, grid: BlockGrid, label: RegionLabel) -> Self {
        Self {
            camera_id,
            grid,
            labels: vec![label; grid.block_count()],
        }
    }

    pub fn from_labels(
        camera_id: u32,
        grid: BlockGrid,
        labels: Vec<RegionLabel>,
    ) -> Result<Self, RegionError> {
        if labels.len() != grid.block_count() {
            return Err(GeometryError::BlockOutOfRange {
                index: labels.len(),
                count: grid.block_count(),
            }
            .into());
        }
        Ok(Self {
            camera_id,
            grid,
            labels,
        })
    }

    pub fn labels(&self) -> &[RegionLabel] {
        &self.labels
    }

    /// Indices of all blocks carrying `label`, ascending.
    pub fn blocks_with(&self, label: RegionLabel) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, l)| **l == label)
            .map(|(k, _)| k)
    }

    pub fn histogram(&self) -> BTreeMap<RegionLabel, usize> {
        let mut h = BTreeMap::new();
        for l in &self.labels {
            *h.entry(*l).or_insert(0) += 1;
        }
        h
    }

    pub fn label_at_pixel(&self, x: u32, y: u32) -> RegionLabel {
        self.labels[self.grid.block_of_pixel(x, y)]
    }
}

pub fn partition(
    camera: &CameraModel,
    world_overlap: &Polygon,
    lanes: &[Lane],
    grid: BlockGrid,
) -> Result<RegionMap, RegionError> {
    if camera.view.inverse().is_none() {
        return Err(RegionError::DegenerateTransform(camera.id));
    }
    if grid.frame_width != camera.width || grid.frame_height != camera.height {
        return Err(RegionError::GridMismatch {
            grid_w: grid.frame_width,
            grid_h: grid.frame_height,
            cam_w: camera.width,
            cam_h: camera.height,
        });
    }
    let labels = (0..grid.block_count())
        .map(|k| {
            let r = grid.block_rect(k);
            let uv = [
                (r.x0 + r.x1) as f64 / 2.0 / camera.width as f64,
                (r.y0 + r.y1) as f64 / 2.0 / camera.height as f64,
            ];
            let p = camera.unproject(uv);
            if world_overlap.contains(p) {
                RegionLabel::Overlapping
            } else if lanes.iter().any(|l| l.kind == LaneKind::Incoming && l.contains(p)) {
                RegionLabel::Incoming
            } else if lanes.iter().any(|l| l.kind == LaneKind::Leaving && l.contains(p)) {
                RegionLabel::Leaving
            } else {
                RegionLabel::Background
            }
        })
        .collect();
    Ok(RegionMap {
        camera_id: camera.id,
        grid,
        labels,
    })
}

pub fn region_of_block(map: &RegionMap, k: usize) -> Result<RegionLabel, RegionError> {
    map.grid.check_index(k)?;
    Ok(map.labels[k])
}

pub fn bbox_intersects_region(p: &BBox, map: &RegionMap, label: RegionLabel) -> bool {
    bbox_blocks(p, &map.grid)
        .into_iter()
        .any(|k| map.labels[k] == label)
}
