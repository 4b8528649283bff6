//! Synthetic intersection world.
//!
//! Vehicles move on a 2D ground plane along piecewise-linear paths and are
//! rendered into each camera as solid-color rectangles over a flat
//! background. Cameras are affine views (rotation, translation, scale) from
//! the ground plane onto normalized image coordinates. The same geometry
//! yields a ground-truth optical flow field, which stands in for a real
//! flow estimator.
//!
//! # Scenario file
//!
//! Scenarios are TOML documents:
//!
//! ```toml
//! name = "example"
//! tick_hz = 10.0                 # simulation ticks per second
//! horizon_ticks = 300            # valid ticks are 0..horizon_ticks
//! seed = 7                       # default run seed
//! visibility_threshold = 0.0005  # min visible box area (fraction of frame)
//! background = [0.35, 0.35, 0.35]
//! overlap = [[-6.0, -6.0], [6.0, -6.0], [6.0, 6.0], [-6.0, 6.0]]
//!
//! [[lanes]]
//! name = "south_in"
//! kind = "incoming"              # or "leaving"
//! rect = [0.0, -40.0, 6.0, -6.0] # world x0, y0, x1, y1
//!
//! [[cameras]]
//! id = 0
//! resolution = [320, 240]
//! frame_rate = 10.0
//! lanes = ["south_in"]           # optional, defaults to every lane
//! view = { center = [0.0, -7.0], heading_deg = 90.0, pixels_per_meter = 8.0 }
//! # or: view = { matrix = [[a, b, c], [d, e, f]] }  (world -> normalized)
//!
//! [[vehicles]]
//! id = 1
//! color = [0.85, 0.1, 0.1]
//! extent = [2.0, 4.5]            # width across, length along the heading (m)
//! start = 0.0                    # seconds; absent before this time
//! path = [
//!   { at = [3.0, -26.0] },
//!   { at = [3.0, 3.0], speed = 10.0, stop = 4.0 },  # waits 4 s on arrival
//!   { at = [-26.0, 3.0], speed = 7.5 },
//! ]
//! ```
//!
//! A pose view places `center` at the image center, points the image "up"
//! direction along `heading_deg` (counter-clockwise from +x) and maps one
//! meter to `pixels_per_meter` pixels. A vehicle disappears once it reaches
//! its last waypoint.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::BBox;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scenario parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario field `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("tick {tick} outside scenario horizon 0..{horizon}")]
    TickOutOfHorizon { tick: u64, horizon: u64 },
    #[error("flow requested from tick {prev} to tick {now}; need prev < now")]
    TickOrder { prev: u64, now: u64 },
    #[error("camera {0} has a degenerate (non-invertible) view transform")]
    DegenerateTransform(u32),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_tick_hz")]
    pub tick_hz: f64,
    pub horizon_ticks: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_visibility")]
    pub visibility_threshold: f64,
    #[serde(default = "default_background")]
    pub background: [f64; 3],
    #[serde(default)]
    pub overlap: Vec<[f64; 2]>,
    #[serde(default)]
    pub lanes: Vec<LaneConfig>,
    pub cameras: Vec<CameraConfig>,
    #[serde(default)]
    pub vehicles: Vec<VehicleConfig>,
}

fn default_tick_hz() -> f64 {
    10.0
}

fn default_visibility() -> f64 {
    0.0005
}

fn default_background() -> [f64; 3] {
    [0.35, 0.35, 0.35]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneKind {
    Incoming,
    Leaving,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneConfig {
    pub name: String,
    pub kind: LaneKind,
    pub rect: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub id: u32,
    pub resolution: [u32; 2],
    #[serde(default = "default_tick_hz")]
    pub frame_rate: f64,
    #[serde(default)]
    pub lanes: Option<Vec<String>>,
    pub view: ViewConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ViewConfig {
    Pose {
        center: [f64; 2],
        heading_deg: f64,
        pixels_per_meter: f64,
    },
    Matrix {
        matrix: [[f64; 3]; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub id: u32,
    pub color: [f64; 3],
    pub extent: [f64; 2],
    #[serde(default)]
    pub start: f64,
    pub path: Vec<WaypointConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointConfig {
    pub at: [f64; 2],
    #[serde(default)]
    pub speed: Option<f64>,
    #[serde(default)]
    pub stop: f64,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SceneError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| SceneError::Parse {
            path: e.path().to_string(),
            message: e.inner().message().trim().to_string(),
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }
}

// ---------------------------------------------------------------------------
// World-plane primitives

/// Affine map `[x, y] -> [a x + b y + c, d x + e y + f]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine2 {
    pub m: [[f64; 3]; 2],
}

impl Affine2 {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let m = &self.m;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2],
        ]
    }

    pub fn determinant(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Option<Affine2> {
        let det = self.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return None;
        }
        let [[a, b, c], [d, e, f]] = self.m;
        let ia = e / det;
        let ib = -b / det;
        let id = -d / det;
        let ie = a / det;
        Some(Affine2 {
            m: [
                [ia, ib, -(ia * c + ib * f)],
                [id, ie, -(id * c + ie * f)],
            ],
        })
    }
}

/// Snap values within rounding distance of 0 or +-1, so quarter-turn
/// headings produce exact axis-aligned views.
fn snap_unit(v: f64) -> f64 {
    for target in [0.0, 1.0, -1.0] {
        if (v - target).abs() < 1e-12 {
            return target;
        }
    }
    v
}

impl ViewConfig {
    pub fn to_affine(&self, width: u32, height: u32) -> Affine2 {
        match *self {
            ViewConfig::Matrix { matrix } => Affine2 { m: matrix },
            ViewConfig::Pose {
                center,
                heading_deg,
                pixels_per_meter,
            } => {
                let th = heading_deg.to_radians();
                let up = [snap_unit(th.cos()), snap_unit(th.sin())];
                let right = [up[1], -up[0]];
                let sx = pixels_per_meter / width as f64;
                let sy = pixels_per_meter / height as f64;
                // u = 0.5 + sx * right.(p - c) ; v = 0.5 - sy * up.(p - c)
                Affine2 {
                    m: [
                        [
                            sx * right[0],
                            sx * right[1],
                            0.5 - sx * (right[0] * center[0] + right[1] * center[1]),
                        ],
                        [
                            -sy * up[0],
                            -sy * up[1],
                            0.5 + sy * (up[0] * center[0] + up[1] * center[1]),
                        ],
                    ],
                }
            }
        }
    }
}

/// Simple polygon on the ground plane (even-odd containment).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Self {
        Self { vertices }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        if self.is_empty() {
            return false;
        }
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = (self.vertices[i][0], self.vertices[i][1]);
            let (xj, yj) = (self.vertices[j][0], self.vertices[j][1]);
            if (yi > p[1]) != (yj > p[1]) && p[0] < (xj - xi) * (p[1] - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub name: String,
    pub kind: LaneKind,
    pub rect: [f64; 4],
}

impl Lane {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let [x0, y0, x1, y1] = self.rect;
        p[0] >= x0.min(x1) && p[0] <= x0.max(x1) && p[1] >= y0.min(y1) && p[1] <= y0.max(y1)
    }
}

// ---------------------------------------------------------------------------
// Cameras and vehicles

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub id: u32,
    pub view: Affine2,
    inverse: Affine2,
    pub width: u32,
    pub height: u32,
    pub frame_rate: f64,
    pub lanes: Vec<String>,
}

impl CameraModel {
    pub fn new(
        id: u32,
        view: Affine2,
        width: u32,
        height: u32,
        frame_rate: f64,
        lanes: Vec<String>,
    ) -> Result<Self, SceneError> {
        let inverse = view.inverse().ok_or(SceneError::DegenerateTransform(id))?;
        Ok(Self {
            id,
            view,
            inverse,
            width,
            height,
            frame_rate,
            lanes,
        })
    }

    /// World point to normalized image coordinates.
    pub fn project(&self, p: [f64; 2]) -> [f64; 2] {
        self.view.apply(p)
    }

    /// Normalized image coordinates back to the ground plane.
    pub fn unproject(&self, uv: [f64; 2]) -> [f64; 2] {
        self.inverse.apply(uv)
    }

    /// Image-space bounding rectangle `[u0, v0, u1, v1]` of world points.
    pub fn project_bounds(&self, points: &[[f64; 2]]) -> [f64; 4] {
        let mut r = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in points {
            let [u, v] = self.project(*p);
            r[0] = r[0].min(u);
            r[1] = r[1].min(v);
            r[2] = r[2].max(u);
            r[3] = r[3].max(v);
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Phase {
    Move {
        t0: f64,
        t1: f64,
        from: [f64; 2],
        to: [f64; 2],
        heading: [f64; 2],
    },
    Stop {
        t0: f64,
        t1: f64,
        at: [f64; 2],
        heading: [f64; 2],
    },
}

impl Phase {
    fn end(&self) -> f64 {
        match self {
            Phase::Move { t1, .. } | Phase::Stop { t1, .. } => *t1,
        }
    }
}

/// Piecewise-linear path with per-segment speed and optional waits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    start: f64,
    phases: Vec<Phase>,
}

/// Position and unit heading of a vehicle at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: [f64; 2],
    pub heading: [f64; 2],
}

impl Trajectory {
    fn build(start: f64, path: &[WaypointConfig], at: &str) -> Result<Self, SceneError> {
        if path.len() < 2 {
            return Err(invalid(format!("{at}.path"), "need at least two waypoints"));
        }
        if !start.is_finite() || start < 0.0 {
            return Err(invalid(format!("{at}.start"), "must be a finite, non-negative time"));
        }
        let mut headings = Vec::with_capacity(path.len() - 1);
        for (i, w) in path.windows(2).enumerate() {
            let dx = w[1].at[0] - w[0].at[0];
            let dy = w[1].at[1] - w[0].at[1];
            let len = dx.hypot(dy);
            if !(len > 0.0) {
                return Err(invalid(
                    format!("{at}.path[{}].at", i + 1),
                    "repeats the previous waypoint",
                ));
            }
            headings.push([dx / len, dy / len]);
        }
        let mut phases = Vec::new();
        let mut t = start;
        for (i, wp) in path.iter().enumerate() {
            if !(wp.stop >= 0.0 && wp.stop.is_finite()) {
                return Err(invalid(format!("{at}.path[{i}].stop"), "must be >= 0"));
            }
            if i > 0 {
                let speed = wp.speed.ok_or_else(|| {
                    invalid(format!("{at}.path[{i}].speed"), "required after the first waypoint")
                })?;
                if !(speed > 0.0 && speed.is_finite()) {
                    return Err(invalid(format!("{at}.path[{i}].speed"), "must be > 0"));
                }
                let prev = path[i - 1].at;
                let len = (wp.at[0] - prev[0]).hypot(wp.at[1] - prev[1]);
                let t1 = t + len / speed;
                phases.push(Phase::Move {
                    t0: t,
                    t1,
                    from: prev,
                    to: wp.at,
                    heading: headings[i - 1],
                });
                t = t1;
            }
            if wp.stop > 0.0 {
                let heading = if i == 0 { headings[0] } else { headings[i - 1] };
                phases.push(Phase::Stop {
                    t0: t,
                    t1: t + wp.stop,
                    at: wp.at,
                    heading,
                });
                t += wp.stop;
            }
        }
        Ok(Self { start, phases })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.phases.last().map(Phase::end).unwrap_or(self.start)
    }

    /// Pose at `time`, or `None` before the start or after the end.
    pub fn pose_at(&self, time: f64) -> Option<Pose> {
        if time < self.start || time > self.end() {
            return None;
        }
        Some(self.pose_clamped(time))
    }

    /// Pose at `time` clamped into the trajectory's time span.
    pub fn pose_clamped(&self, time: f64) -> Pose {
        let time = time.clamp(self.start, self.end());
        for phase in &self.phases {
            match *phase {
                Phase::Move {
                    t0,
                    t1,
                    from,
                    to,
                    heading,
                } if time <= t1 => {
                    let a = if t1 > t0 { (time - t0) / (t1 - t0) } else { 1.0 };
                    return Pose {
                        position: [from[0] + a * (to[0] - from[0]), from[1] + a * (to[1] - from[1])],
                        heading,
                    };
                }
                Phase::Stop { t1, at, heading, .. } if time <= t1 => {
                    return Pose {
                        position: at,
                        heading,
                    };
                }
                _ => {}
            }
        }
        match self.phases.last() {
            Some(Phase::Move { to, heading, .. }) => Pose {
                position: *to,
                heading: *heading,
            },
            Some(Phase::Stop { at, heading, .. }) => Pose {
                position: *at,
                heading: *heading,
            },
            None => unreachable!("trajectories have at least one phase"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u32,
    pub trajectory: Trajectory,
    /// Width across and length along the heading, in meters.
    pub extent: [f64; 2],
    pub intrinsic_color: [f64; 3],
}

impl Vehicle {
    pub fn color_u8(&self) -> [u8; 3] {
        self.intrinsic_color.map(to_u8)
    }

    /// Ground-plane footprint corners for a pose.
    pub fn footprint(&self, pose: &Pose) -> [[f64; 2]; 4] {
        let [hx, hy] = pose.heading;
        let (half_w, half_l) = (self.extent[0] / 2.0, self.extent[1] / 2.0);
        let along = [hx * half_l, hy * half_l];
        let across = [-hy * half_w, hx * half_w];
        let [cx, cy] = pose.position;
        [
            [cx + along[0] + across[0], cy + along[1] + across[1]],
            [cx + along[0] - across[0], cy + along[1] - across[1]],
            [cx - along[0] - across[0], cy - along[1] - across[1]],
            [cx - along[0] + across[0], cy - along[1] + across[1]],
        ]
    }

    /// Axis-aligned world rectangle `[x0, y0, x1, y1]` around the footprint.
    pub fn world_bounds(&self, pose: &Pose) -> [f64; 4] {
        let mut r = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in self.footprint(pose) {
            r[0] = r[0].min(p[0]);
            r[1] = r[1].min(p[1]);
            r[2] = r[2].max(p[0]);
            r[3] = r[3].max(p[1]);
        }
        r
    }
}

fn to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

// ---------------------------------------------------------------------------
// Frames and flow

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthBox {
    pub bbox: BBox,
    pub vehicle_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub camera_id: u32,
    pub tick: u64,
    pub width: u32,
    pub height: u32,
    /// Row-major RGB pixels.
    pub pixels: Vec<[u8; 3]>,
    pub ground_truth: Vec<TruthBox>,
}

impl Frame {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn truth_boxes(&self) -> Vec<BBox> {
        self.ground_truth.iter().map(|t| t.bbox).collect()
    }
}

/// Per-pixel screen displacement in pixels since the previous processed tick.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub camera_id: u32,
    pub tick: u64,
    pub width: u32,
    pub height: u32,
    pub vectors: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn zeros(camera_id: u32, tick: u64, width: u32, height: u32) -> Self {
        Self {
            camera_id,
            tick,
            width,
            height,
            vectors: vec![[0.0, 0.0]; (width * height) as usize],
        }
    }

    pub fn at(&self, x: u32, y: u32) -> [f32; 2] {
        self.vectors[(y * self.width + x) as usize]
    }
}

// ---------------------------------------------------------------------------
// Scene

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: ScenarioConfig,
    pub cameras: Vec<CameraModel>,
    pub vehicles: Vec<Vehicle>,
    pub overlap: Polygon,
    pub lanes: Vec<Lane>,
    background: [u8; 3],
}

/// Image rectangle `[u0, v0, u1, v1]` of a vehicle in one camera.
#[derive(Debug, Clone, Copy)]
struct Placement<'a> {
    vehicle: &'a Vehicle,
    rect: [f64; 4],
}

pub fn build_scene(config: &ScenarioConfig) -> Result<Scene, SceneError> {
    if !(config.tick_hz > 0.0 && config.tick_hz.is_finite()) {
        return Err(invalid("tick_hz", "must be > 0"));
    }
    if config.horizon_ticks == 0 {
        return Err(invalid("horizon_ticks", "must be > 0"));
    }
    if !(0.0..1.0).contains(&config.visibility_threshold) {
        return Err(invalid("visibility_threshold", "must be in [0, 1)"));
    }
    if !(config.overlap.is_empty() || config.overlap.len() >= 3) {
        return Err(invalid("overlap", "polygon needs at least three vertices"));
    }
    for (i, c) in config.background.iter().enumerate() {
        if !(0.0..=1.0).contains(c) {
            return Err(invalid(format!("background[{i}]"), "must be in [0, 1]"));
        }
    }

    let mut lanes = Vec::with_capacity(config.lanes.len());
    for (i, l) in config.lanes.iter().enumerate() {
        if lanes.iter().any(|x: &Lane| x.name == l.name) {
            return Err(invalid(format!("lanes[{i}].name"), format!("duplicate lane `{}`", l.name)));
        }
        if l.rect.iter().any(|v| !v.is_finite()) || l.rect[0] == l.rect[2] || l.rect[1] == l.rect[3] {
            return Err(invalid(format!("lanes[{i}].rect"), "needs a finite, non-empty rectangle"));
        }
        lanes.push(Lane {
            name: l.name.clone(),
            kind: l.kind,
            rect: l.rect,
        });
    }

    let mut cameras = Vec::with_capacity(config.cameras.len());
    for (i, c) in config.cameras.iter().enumerate() {
        let at = format!("cameras[{i}]");
        if cameras.iter().any(|x: &CameraModel| x.id == c.id) {
            return Err(invalid(format!("{at}.id"), format!("duplicate camera id {}", c.id)));
        }
        let [w, h] = c.resolution;
        if w == 0 || h == 0 {
            return Err(invalid(format!("{at}.resolution"), "must be positive"));
        }
        if (c.frame_rate - config.tick_hz).abs() > 1e-9 {
            return Err(invalid(
                format!("{at}.frame_rate"),
                format!("must equal tick_hz ({})", config.tick_hz),
            ));
        }
        if let ViewConfig::Pose { pixels_per_meter, .. } = c.view {
            if !(pixels_per_meter > 0.0) {
                return Err(invalid(format!("{at}.view.pixels_per_meter"), "must be > 0"));
            }
        }
        let lane_names = match &c.lanes {
            Some(names) => {
                for (j, n) in names.iter().enumerate() {
                    if !lanes.iter().any(|l| &l.name == n) {
                        return Err(invalid(
                            format!("{at}.lanes[{j}]"),
                            format!("unknown lane `{n}`"),
                        ));
                    }
                }
                names.clone()
            }
            None => lanes.iter().map(|l| l.name.clone()).collect(),
        };
        let view = c.view.to_affine(w, h);
        let cam = CameraModel::new(c.id, view, w, h, c.frame_rate, lane_names).map_err(|_| {
            invalid(format!("{at}.view"), "view transform is not invertible")
        })?;
        cameras.push(cam);
    }

    let mut vehicles = Vec::with_capacity(config.vehicles.len());
    for (i, v) in config.vehicles.iter().enumerate() {
        let at = format!("vehicles[{i}]");
        if vehicles.iter().any(|x: &Vehicle| x.id == v.id) {
            return Err(invalid(format!("{at}.id"), format!("duplicate vehicle id {}", v.id)));
        }
        if !(v.extent[0] > 0.0 && v.extent[1] > 0.0) {
            return Err(invalid(format!("{at}.extent"), "must be positive"));
        }
        for (j, c) in v.color.iter().enumerate() {
            if !(0.0..=1.0).contains(c) {
                return Err(invalid(format!("{at}.color[{j}]"), "must be in [0, 1]"));
            }
        }
        vehicles.push(Vehicle {
            id: v.id,
            trajectory: Trajectory::build(v.start, &v.path, &at)?,
            extent: v.extent,
            intrinsic_color: v.color,
        });
    }
    // painter's order: ascending id, later ids drawn on top
    vehicles.sort_by_key(|v| v.id);

    Ok(Scene {
        config: config.clone(),
        cameras,
        vehicles,
        overlap: Polygon::new(config.overlap.clone()),
        lanes,
        background: config.background.map(to_u8),
    })
}

impl Scene {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        build_scene(&ScenarioConfig::from_file(path)?)
    }

    pub fn horizon(&self) -> u64 {
        self.config.horizon_ticks
    }

    pub fn tick_seconds(&self) -> f64 {
        1.0 / self.config.tick_hz
    }

    pub fn time_of(&self, tick: u64) -> f64 {
        tick as f64 / self.config.tick_hz
    }

    pub fn camera(&self, id: u32) -> Option<&CameraModel> {
        self.cameras.iter().find(|c| c.id == id)
    }

    pub fn lanes_for(&self, camera: &CameraModel) -> Vec<Lane> {
        self.lanes
            .iter()
            .filter(|l| camera.lanes.contains(&l.name))
            .cloned()
            .collect()
    }

    fn check_tick(&self, tick: u64) -> Result<(), SceneError> {
        if tick >= self.horizon() {
            Err(SceneError::TickOutOfHorizon {
                tick,
                horizon: self.horizon(),
            })
        } else {
            Ok(())
        }
    }

    pub fn vehicle_pose(&self, vehicle_id: u32, tick: u64) -> Option<Pose> {
        let v = self.vehicles.iter().find(|v| v.id == vehicle_id)?;
        v.trajectory.pose_at(self.time_of(tick))
    }

    /// Vehicles whose ground-plane center lies inside the overlap polygon.
    pub fn vehicles_in_overlap(&self, tick: u64) -> Vec<u32> {
        let t = self.time_of(tick);
        self.vehicles
            .iter()
            .filter_map(|v| v.trajectory.pose_at(t).map(|p| (v.id, p)))
            .filter(|(_, p)| self.overlap.contains(p.position))
            .map(|(id, _)| id)
            .collect()
    }

    fn placements(&self, camera: &CameraModel, time: f64) -> Vec<Placement<'_>> {
        self.vehicles
            .iter()
            .filter_map(|v| {
                let pose = v.trajectory.pose_at(time)?;
                Some(Placement {
                    vehicle: v,
                    rect: camera.project_bounds(&v.footprint(&pose)),
                })
            })
            .collect()
    }

    fn raster(rect: &[f64; 4], camera: &CameraModel) -> Option<crate::geometry::PixelRect> {
        let b = BBox::new(rect[0], rect[1], rect[2], rect[3]).ok()?;
        let r = b.pixel_rect(camera.width, camera.height);
        (!r.is_empty()).then_some(r)
    }

    pub fn render(&self, camera: &CameraModel, tick: u64) -> Result<Frame, SceneError> {
        self.check_tick(tick)?;
        let (w, h) = (camera.width, camera.height);
        let mut pixels = vec![self.background; (w * h) as usize];
        let mut ground_truth = Vec::new();
        for pl in self.placements(camera, self.time_of(tick)) {
            let Some(r) = Self::raster(&pl.rect, camera) else {
                continue;
            };
            let color = pl.vehicle.color_u8();
            for y in r.y0..r.y1 {
                let row = (y * w) as usize;
                pixels[row + r.x0 as usize..row + r.x1 as usize].fill(color);
            }
            if let Ok(b) = BBox::new(pl.rect[0], pl.rect[1], pl.rect[2], pl.rect[3]) {
                if b.area() >= self.config.visibility_threshold {
                    ground_truth.push(TruthBox {
                        bbox: b.with_id(pl.vehicle.id),
                        vehicle_id: pl.vehicle.id,
                    });
                }
            }
        }
        Ok(Frame {
            camera_id: camera.id,
            tick,
            width: w,
            height: h,
            pixels,
            ground_truth,
        })
    }

    /// Ground-truth flow: every pixel covered by a vehicle at `tick_now`
    /// carries that vehicle's screen displacement since `tick_prev`.
    pub fn flow_field(
        &self,
        camera: &CameraModel,
        tick_prev: u64,
        tick_now: u64,
    ) -> Result<FlowField, SceneError> {
        self.check_tick(tick_prev)?;
        self.check_tick(tick_now)?;
        if tick_prev >= tick_now {
            return Err(SceneError::TickOrder {
                prev: tick_prev,
                now: tick_now,
            });
        }
        let (w, h) = (camera.width, camera.height);
        let mut field = FlowField::zeros(camera.id, tick_now, w, h);
        let t_prev = self.time_of(tick_prev);
        for pl in self.placements(camera, self.time_of(tick_now)) {
            let Some(r) = Self::raster(&pl.rect, camera) else {
                continue;
            };
            let before = pl.vehicle.trajectory.pose_clamped(t_prev);
            let prev_rect = camera.project_bounds(&pl.vehicle.footprint(&before));
            let dx = ((pl.rect[0] + pl.rect[2]) - (prev_rect[0] + prev_rect[2])) / 2.0 * w as f64;
            let dy = ((pl.rect[1] + pl.rect[3]) - (prev_rect[1] + prev_rect[3])) / 2.0 * h as f64;
            let vec = [dx as f32, dy as f32];
            for y in r.y0..r.y1 {
                let row = (y * w) as usize;
                field.vectors[row + r.x0 as usize..row + r.x1 as usize].fill(vec);
            }
        }
        Ok(field)
    }

    /// SHA-256 over the config and every tenth tick's frames, hex encoded.
    pub fn fingerprint(&self) -> Result<String, SceneError> {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&self.config).expect("config serializes"));
        for tick in (0..self.horizon()).step_by(10) {
            for cam in &self.cameras {
                let f = self.render(cam, tick)?;
                for p in &f.pixels {
                    hasher.update(p);
                }
                for t in &f.ground_truth {
                    hasher.update(t.vehicle_id.to_le_bytes());
                    for v in [t.bbox.x_min, t.bbox.y_min, t.bbox.x_max, t.bbox.y_max] {
                        hasher.update(v.to_le_bytes());
                    }
                }
            }
        }
        Ok(hex::encode(hasher.finalize()))
    }

    /// Non-fatal findings about a scenario.
    pub fn lint(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut colors: BTreeMap<[u8; 3], u32> = BTreeMap::new();
        for v in &self.vehicles {
            if let Some(other) = colors.insert(v.color_u8(), v.id) {
                out.push(format!("vehicles {other} and {} share a color; cross-camera matching cannot tell them apart", v.id));
            }
            if v.color_u8() == self.background {
                out.push(format!("vehicle {} has the background color", v.id));
            }
        }
        if self.overlap.is_empty() {
            out.push("no overlap polygon declared; result sharing has nothing to do".into());
        }
        for cam in &self.cameras {
            let sees_overlap = self.overlap.vertices.iter().any(|p| {
                let [u, v] = cam.project(*p);
                (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)
            });
            if !self.overlap.is_empty() && !sees_overlap {
                out.push(format!("camera {} does not see any overlap vertex", cam.id));
            }
        }
        let mut reported = std::collections::BTreeSet::new();
        for tick in 0..self.horizon() {
            let t = self.time_of(tick);
            let boxes: Vec<(u32, [f64; 4])> = self
                .vehicles
                .iter()
                .filter_map(|v| v.trajectory.pose_at(t).map(|p| (v.id, v.world_bounds(&p))))
                .collect();
            for (i, a) in boxes.iter().enumerate() {
                for b in &boxes[i + 1..] {
                    let ox = a.1[2].min(b.1[2]) - a.1[0].max(b.1[0]);
                    let oy = a.1[3].min(b.1[3]) - a.1[1].max(b.1[1]);
                    if ox > 0.0 && oy > 0.0 && reported.insert((a.0, b.0)) {
                        out.push(format!(
                            "vehicles {} and {} overlap on the ground plane at tick {tick}",
                            a.0, b.0
                        ));
                    }
                }
            }
        }
        out
    }
}
