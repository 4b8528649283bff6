//! Normalized bounding boxes, block grids and the motion-shift primitive.
//!
//! All box coordinates are fractions of the frame size in `[0, 1]`. Motion
//! offsets and motion distances use the same normalized scale, so the
//! default distance threshold of `0.1` means "one tenth of the frame".
//! Pixel coordinates only appear at the raster boundary: a pixel belongs to
//! a box when its center lies inside the half-open box `[min, max)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid box ({x_min}, {y_min}, {x_max}, {y_max}): need min < max on both axes")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
    #[error("box collapsed to zero area after shifting out of the frame")]
    DegenerateShift,
    #[error("invalid block grid {width}x{height} with block size {block_size}")]
    InvalidGrid {
        width: u32,
        height: u32,
        block_size: u32,
    },
    #[error("block index {index} out of range (grid has {count} blocks)")]
    BlockOutOfRange { index: usize, count: usize },
}

/// Axis-aligned box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<u32>,
    pub confidence: f64,
}

impl BBox {
    /// Builds a box, clamping every coordinate to `[0, 1]`.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let clamp = |v: f64| v.clamp(0.0, 1.0);
        let (cx0, cy0, cx1, cy1) = (clamp(x_min), clamp(y_min), clamp(x_max), clamp(y_max));
        if !(cx0 < cx1 && cy0 < cy1) {
            return Err(GeometryError::InvalidBox {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        Ok(Self {
            x_min: cx0,
            y_min: cy0,
            x_max: cx1,
            y_max: cy1,
            object_id: None,
            confidence: 1.0,
        })
    }

    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self, GeometryError> {
        Self::new(
            cx - width / 2.0,
            cy - height / 2.0,
            cx + width / 2.0,
            cy + height / 2.0,
        )
    }

    pub fn with_id(mut self, id: u32) -> Self {
        self.object_id = Some(id);
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence.clamp(0.0, 1.0);
        self
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Pixels whose centers fall inside the box, for a `width`x`height` raster.
    pub fn pixel_rect(&self, width: u32, height: u32) -> PixelRect {
        let span = |lo: f64, hi: f64, n: u32| {
            let n_f = n as f64;
            let a = ((lo * n_f - 0.5).ceil()).clamp(0.0, n_f) as u32;
            let b = ((hi * n_f - 0.5).ceil()).clamp(0.0, n_f) as u32;
            (a, b.max(a))
        };
        let (x0, x1) = span(self.x_min, self.x_max, width);
        let (y0, y1) = span(self.y_min, self.y_max, height);
        PixelRect { x0, y0, x1, y1 }
    }
}

/// Intersection over union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelRect {
    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }

    pub fn width(&self) -> u32 {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> u32 {
        self.y1.saturating_sub(self.y0)
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn intersect(&self, other: &PixelRect) -> PixelRect {
        let r = PixelRect {
            x0: self.x0.max(other.x0),
            y0: self.y0.max(other.y0),
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
        };
        if r.is_empty() {
            PixelRect::default()
        } else {
            r
        }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

/// Displacement in normalized units (fractions of frame width / height).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionOffset {
    pub x: f64,
    pub y: f64,
}

impl MotionOffset {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

pub fn motion_distance(o: MotionOffset) -> f64 {
    o.x.hypot(o.y)
}

/// Translates `p` by `o`, clamps it to the frame and returns the motion
/// distance alongside. The object id and confidence carry over.
pub fn shift_bbox(p: &BBox, o: MotionOffset) -> Result<(BBox, f64), GeometryError> {
    let shifted = BBox::new(p.x_min + o.x, p.y_min + o.y, p.x_max + o.x, p.y_max + o.y)
        .map_err(|_| GeometryError::DegenerateShift)?;
    Ok((
        BBox {
            object_id: p.object_id,
            confidence: p.confidence,
            ..shifted
        },
        motion_distance(o),
    ))
}

/// Square tiling of a frame. Block `k` is row-major: `k = row * cols + col`.
/// Right and bottom edge blocks may be partial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGrid {
    pub frame_width: u32,
    pub frame_height: u32,
    pub block_size: u32,
    pub cols: u32,
    pub rows: u32,
}

impl BlockGrid {
    pub fn new(frame_width: u32, frame_height: u32, block_size: u32) -> Result<Self, GeometryError> {
        if frame_width == 0 || frame_height == 0 || block_size == 0 {
            return Err(GeometryError::InvalidGrid {
                width: frame_width,
                height: frame_height,
                block_size,
            });
        }
        Ok(Self {
            frame_width,
            frame_height,
            block_size,
            cols: frame_width.div_ceil(block_size),
            rows: frame_height.div_ceil(block_size),
        })
    }

    pub fn block_count(&self) -> usize {
        self.cols as usize * self.rows as usize
    }

    pub fn check_index(&self, k: usize) -> Result<(), GeometryError> {
        if k >= self.block_count() {
            Err(GeometryError::BlockOutOfRange {
                index: k,
                count: self.block_count(),
            })
        } else {
            Ok(())
        }
    }

    pub fn block_of_pixel(&self, x: u32, y: u32) -> usize {
        (y / self.block_size) as usize * self.cols as usize + (x / self.block_size) as usize
    }

    pub fn block_rect(&self, k: usize) -> PixelRect {
        let col = (k % self.cols as usize) as u32;
        let row = (k / self.cols as usize) as u32;
        let x0 = col * self.block_size;
        let y0 = row * self.block_size;
        PixelRect {
            x0,
            y0,
            x1: (x0 + self.block_size).min(self.frame_width),
            y1: (y0 + self.block_size).min(self.frame_height),
        }
    }

    pub fn block_pixel_count(&self, k: usize) -> u64 {
        self.block_rect(k).area()
    }

    pub fn frame_pixel_count(&self) -> u64 {
        self.frame_width as u64 * self.frame_height as u64
    }

    /// Blocks touched by a pixel rectangle.
    pub fn blocks_of_rect(&self, r: &PixelRect) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        if r.is_empty() {
            return out;
        }
        let bs = self.block_size;
        for row in (r.y0 / bs)..=((r.y1 - 1) / bs) {
            for col in (r.x0 / bs)..=((r.x1 - 1) / bs) {
                out.insert(row as usize * self.cols as usize + col as usize);
            }
        }
        out
    }
}

/// Blocks whose pixels intersect the box's pixel rectangle.
pub fn bbox_blocks(p: &BBox, g: &BlockGrid) -> BTreeSet<usize> {
    g.blocks_of_rect(&p.pixel_rect(g.frame_width, g.frame_height))
}
