//! Planar scene simulation: charger pose, electrode stand, camera detector.
//!
//! World frame: X/Y on the floor, Z up. Yaw is measured from +Y toward +X, so
//! a charger at yaw 0° drives along +Y and at 90° along +X.
//!
//! The actuator frame rides on the charger at `mount.delta_height` above the
//! floor with X to the right, Y down and Z forward. The camera frame is tied
//! to it by [`crate::geometry::camera_to_delta`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("depth grid has no valid (non-zero) pixels")]
    AllHoles,
    #[error("depth grid is empty")]
    EmptyGrid,
    #[error("pixel ({0}, {1}) outside a {2}x{3} grid")]
    PixelOutOfBounds(usize, usize, usize, usize),
    #[error("grid data length {0} does not match {1}x{2}")]
    BadShape(usize, usize, usize),
}

pub fn normalize_yaw(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Planar pose: position in cm, yaw in degrees within (−180°, 180°].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw: normalize_yaw(yaw) }
    }

    pub fn heading(&self) -> (f64, f64) {
        let (s, c) = self.yaw.to_radians().sin_cos();
        (s, c)
    }
}

/// How the actuator and camera sit on the charger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChargerMount {
    /// Height of the actuator frame origin above the floor, cm.
    pub delta_height: f64,
    pub camera_pitch_deg: f64,
    pub camera_offset_y: f64,
}

impl Default for ChargerMount {
    fn default() -> Self {
        Self {
            delta_height: 16.0,
            camera_pitch_deg: geometry::CAMERA_PITCH_DEG,
            camera_offset_y: geometry::CAMERA_OFFSET_Y_CM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub charger: Pose2,
    /// Electrode center in the world frame; `z` is the stand height.
    pub electrode_pos: Vec3,
    pub mount: ChargerMount,
    pub rng_seed: u64,
}

impl WorldState {
    /// Charger at the origin rotated by `omega_deg`, electrodes `l_cm` ahead
    /// along +Y on a stand of `stand_height` cm.
    pub fn starting_position(omega_deg: f64, l_cm: f64, stand_height: f64) -> Self {
        Self {
            charger: Pose2::new(0.0, 0.0, omega_deg),
            electrode_pos: Vec3::new(0.0, l_cm, stand_height),
            mount: ChargerMount::default(),
            rng_seed: 0,
        }
    }

    pub fn electrode_height(&self) -> f64 {
        self.electrode_pos.z
    }

    /// Maps a world point into the actuator frame of the current pose.
    pub fn world_to_delta(&self, p: Vec3) -> Vec3 {
        let (s, c) = self.charger.heading();
        let dx = p.x - self.charger.x;
        let dy = p.y - self.charger.y;
        let dz = p.z - self.mount.delta_height;
        Vec3::new(c * dx - s * dy, -dz, s * dx + c * dy)
    }

    pub fn camera_to_delta(&self, p_cam: Vec3) -> Vec3 {
        geometry::camera_to_delta(p_cam, self.mount.camera_pitch_deg, self.mount.camera_offset_y)
    }

    pub fn electrode_in_delta(&self) -> Vec3 {
        self.world_to_delta(self.electrode_pos)
    }

    pub fn electrode_in_camera(&self) -> Vec3 {
        geometry::delta_to_camera(
            self.electrode_in_delta(),
            self.mount.camera_pitch_deg,
            self.mount.camera_offset_y,
        )
    }

    /// Horizontal distance from the charger to the electrodes, cm.
    pub fn planar_distance(&self) -> f64 {
        (self.electrode_pos.x - self.charger.x).hypot(self.electrode_pos.y - self.charger.y)
    }
}

pub fn rotate(w: &WorldState, delta_yaw: f64) -> WorldState {
    let mut out = *w;
    out.charger.yaw = normalize_yaw(w.charger.yaw + delta_yaw);
    out
}

pub fn advance(w: &WorldState, dist: f64) -> WorldState {
    debug_assert!(dist >= 0.0);
    let (s, c) = w.charger.heading();
    let mut out = *w;
    out.charger.x += dist * s;
    out.charger.y += dist * c;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lighting {
    Bright,
    Normal,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LightingFactors {
    pub bright: f64,
    pub normal: f64,
    pub dark: f64,
}

impl Default for LightingFactors {
    fn default() -> Self {
        Self { bright: 0.7, normal: 1.0, dark: 1.8 }
    }
}

/// Parametric stand-in for the image detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorModel {
    pub fov_halfangle: f64,
    /// Camera-to-electrode range limit, cm.
    pub max_range: f64,
    /// Probability of missing a visible target per attempt, before lighting.
    pub miss_prob: f64,
    /// Std-dev of the isotropic noise on the reported center, cm.
    pub center_noise_sigma: f64,
    pub lighting: Lighting,
    pub lighting_factors: LightingFactors,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            fov_halfangle: 35.0,
            max_range: 40.0,
            miss_prob: 0.41,
            center_noise_sigma: 0.5,
            lighting: Lighting::Normal,
            lighting_factors: LightingFactors::default(),
        }
    }
}

impl DetectorModel {
    pub fn noiseless() -> Self {
        Self { miss_prob: 0.0, center_noise_sigma: 0.0, ..Self::default() }
    }

    pub fn lighting_factor(&self) -> f64 {
        match self.lighting {
            Lighting::Bright => self.lighting_factors.bright,
            Lighting::Normal => self.lighting_factors.normal,
            Lighting::Dark => self.lighting_factors.dark,
        }
    }

    pub fn effective_miss_prob(&self) -> f64 {
        (self.miss_prob * self.lighting_factor()).clamp(0.0, 1.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.miss_prob) {
            return Err(format!("miss_prob must be in [0, 1], got {}", self.miss_prob));
        }
        if self.center_noise_sigma.is_nan() || self.center_noise_sigma < 0.0 {
            return Err(format!("center_noise_sigma must be >= 0, got {}", self.center_noise_sigma));
        }
        if !(self.fov_halfangle > 0.0 && self.fov_halfangle < 180.0) {
            return Err(format!("fov_halfangle must be in (0, 180), got {}", self.fov_halfangle));
        }
        if self.max_range.is_nan() || self.max_range <= 0.0 {
            return Err(format!("max_range must be > 0, got {}", self.max_range));
        }
        Ok(())
    }

    /// Geometric visibility of a camera-frame point: in front of the lens,
    /// inside the view cone and within range.
    pub fn can_see(&self, p_cam: Vec3) -> bool {
        let range = p_cam.norm();
        if p_cam.z <= 0.0 || range > self.max_range {
            return false;
        }
        let cos_off_axis = p_cam.z / range;
        cos_off_axis >= self.fov_halfangle.to_radians().cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub detected: bool,
    /// Center of the reported bounding box in the camera frame, cm.
    pub bbox_center_cam: Option<Vec3>,
    /// Camera range to the reported center, cm.
    pub distance: Option<f64>,
}

impl Observation {
    pub const MISSED: Observation =
        Observation { detected: false, bbox_center_cam: None, distance: None };

    fn hit(center: Vec3) -> Self {
        Self { detected: true, bbox_center_cam: Some(center), distance: Some(center.norm()) }
    }
}

/// One detection attempt.
///
/// Draws nothing from `rng` when the electrodes are not visible, one uniform
/// for the hit/miss decision otherwise, and three normals on a hit.
pub fn observe<R: Rng + ?Sized>(w: &WorldState, d: &DetectorModel, rng: &mut R) -> Observation {
    let truth = w.electrode_in_camera();
    if !d.can_see(truth) {
        return Observation::MISSED;
    }
    let u: f64 = rng.random();
    if u < d.effective_miss_prob() {
        return Observation::MISSED;
    }
    let sigma = d.center_noise_sigma;
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    let nz: f64 = rng.sample(StandardNormal);
    Observation::hit(truth + Vec3::new(nx, ny, nz) * sigma)
}

/// Depth image in cm, row-major; zeros mark pixels with no depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DepthGrid {
    /// Sensor resolution of the camera stream.
    pub const DEFAULT_ROWS: usize = 480;
    pub const DEFAULT_COLS: usize = 840;

    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, WorldError> {
        if rows == 0 || cols == 0 {
            return Err(WorldError::EmptyGrid);
        }
        if data.len() != rows * cols {
            return Err(WorldError::BadShape(data.len(), rows, cols));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self, WorldError> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

fn has_depth(v: f64) -> bool {
    v != 0.0
}

/// Nearest pixel with non-zero depth, by Euclidean pixel distance. Ties go
/// to the first candidate in row-major order.
///
/// Searches square rings of growing Chebyshev radius and stops once the ring
/// can no longer hold anything closer than the best hit.
pub fn nearest_valid_depth(
    depth: &DepthGrid,
    pixel: (usize, usize),
) -> Result<(usize, usize), WorldError> {
    let (r0, c0) = pixel;
    if r0 >= depth.rows || c0 >= depth.cols {
        return Err(WorldError::PixelOutOfBounds(r0, c0, depth.rows, depth.cols));
    }
    if has_depth(depth.get(r0, c0)) {
        return Ok(pixel);
    }
    let max_ring = (depth.rows.max(depth.cols)) as i64;
    let mut best: Option<(i64, usize, usize)> = None;
    let (r0, c0) = (r0 as i64, c0 as i64);
    for k in 1..=max_ring {
        if let Some((d2, _, _)) = best {
            if k * k > d2 {
                break;
            }
        }
        let r_lo = (r0 - k).max(0);
        let r_hi = (r0 + k).min(depth.rows as i64 - 1);
        for r in r_lo..=r_hi {
            let on_edge_row = (r - r0).abs() == k;
            let cols: Box<dyn Iterator<Item = i64>> = if on_edge_row {
                Box::new((c0 - k).max(0)..=(c0 + k).min(depth.cols as i64 - 1))
            } else {
                Box::new([c0 - k, c0 + k].into_iter().filter(|&c| c >= 0 && c < depth.cols as i64))
            };
            for c in cols {
                if !has_depth(depth.get(r as usize, c as usize)) {
                    continue;
                }
                let d2 = (r - r0).pow(2) + (c - c0).pow(2);
                let cand = (d2, r as usize, c as usize);
                if best.is_none_or(|b| cand < b) {
                    best = Some(cand);
                }
            }
        }
    }
    best.map(|(_, r, c)| (r, c)).ok_or(WorldError::AllHoles)
}
