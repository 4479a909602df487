//! Vectors, rigid transforms and the camera-to-actuator frame change.
//!
//! Lengths are centimeters throughout. Angles cross the public API in degrees
//! and are converted to radians exactly once, inside the constructors.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pitch of the camera frame relative to the actuator frame, degrees.
pub const CAMERA_PITCH_DEG: f64 = -50.0;
/// Offset of the camera origin along the actuator Y axis, cm.
pub const CAMERA_OFFSET_Y_CM: f64 = -19.0;

const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rotation is not orthonormal (max |RᵀR − I| = {0:e})")]
    NotOrthonormal(f64),
    #[error("rotation has determinant {0}, expected +1")]
    Improper(f64),
    #[error("non-finite component in {0}")]
    NonFinite(&'static str),
}

/// A point or displacement in 3D, centimeters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn rot_x_deg(deg: f64) -> Mat3 {
        let (s, c) = deg.to_radians().sin_cos();
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rot_y_deg(deg: f64) -> Mat3 {
        let (s, c) = deg.to_radians().sin_cos();
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_z_deg(deg: f64) -> Mat3 {
        let (s, c) = deg.to_radians().sin_cos();
        Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest entry of |RᵀR − I|.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.transpose().mul_mat(self);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.0[i][j] - target).abs());
            }
        }
        worst
    }
}

/// A proper rigid motion `p ↦ R·p + t`.
///
/// The rotation is validated once at construction; `apply` never re-checks it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: Mat3::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        if !rotation.0.iter().flatten().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite("rotation"));
        }
        if !translation.is_finite() {
            return Err(GeometryError::NonFinite("translation"));
        }
        let err = rotation.orthonormality_error();
        if err >= ORTHO_TOL {
            return Err(GeometryError::NotOrthonormal(err));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() >= ORTHO_TOL {
            return Err(GeometryError::Improper(det));
        }
        Ok(Self { rotation, translation })
    }

    pub fn translation_only(t: Vec3) -> Self {
        Self { rotation: Mat3::IDENTITY, translation: t }
    }

    /// Elementary rotations built from `sin_cos` are orthonormal to rounding.
    fn from_elementary(rotation: Mat3, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn rotation_x_deg(deg: f64) -> Self {
        Self::from_elementary(Mat3::rot_x_deg(deg), Vec3::ZERO)
    }

    pub fn rotation_y_deg(deg: f64) -> Self {
        Self::from_elementary(Mat3::rot_y_deg(deg), Vec3::ZERO)
    }

    pub fn rotation_z_deg(deg: f64) -> Self {
        Self::from_elementary(Mat3::rot_z_deg(deg), Vec3::ZERO)
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p) + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation.mul_mat(&other.rotation),
            translation: self.rotation.mul_vec(other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -rt.mul_vec(self.translation) }
    }

    /// Row-major 4×4 homogeneous matrix.
    pub fn to_homogeneous(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation.0;
        let t = self.translation;
        [
            [r[0][0], r[0][1], r[0][2], t.x],
            [r[1][0], r[1][1], r[1][2], t.y],
            [r[2][0], r[2][1], r[2][2], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            rotation: Mat3,
            translation: Vec3,
        }
        let raw = Raw::deserialize(d)?;
        RigidTransform::new(raw.rotation, raw.translation).map_err(serde::de::Error::custom)
    }
}

/// Camera-frame to actuator-frame transform: a pitch of `theta_deg` about the
/// shared X axis followed by an offset of `l_cm` along the actuator Y axis.
pub fn camera_to_delta_transform(theta_deg: f64, l_cm: f64) -> RigidTransform {
    RigidTransform::from_elementary(Mat3::rot_x_deg(theta_deg), Vec3::new(0.0, l_cm, 0.0))
}

/// Maps a camera-frame point into the actuator frame.
///
/// X is shared by both frames and passes through untouched.
pub fn camera_to_delta(p_cam: Vec3, theta_deg: f64, l_cm: f64) -> Vec3 {
    let (s, c) = theta_deg.to_radians().sin_cos();
    Vec3::new(p_cam.x, c * p_cam.y - s * p_cam.z + l_cm, s * p_cam.y + c * p_cam.z)
}

/// [`camera_to_delta`] with the mounting of the real charger.
pub fn camera_to_delta_default(p_cam: Vec3) -> Vec3 {
    camera_to_delta(p_cam, CAMERA_PITCH_DEG, CAMERA_OFFSET_Y_CM)
}

/// Inverse of [`camera_to_delta`].
pub fn delta_to_camera(p_delta: Vec3, theta_deg: f64, l_cm: f64) -> Vec3 {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let y = p_delta.y - l_cm;
    Vec3::new(p_delta.x, c * y + s * p_delta.z, -s * y + c * p_delta.z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).to_array().iter().all(|d| d.abs() < tol)
    }

    #[test]
    fn apply_identity() {
        let p = Vec3::new(3.0, 4.0, 5.0);
        assert_eq!(RigidTransform::IDENTITY.apply(p), p);
    }

    #[test]
    fn apply_translation_maps_origin() {
        let t = RigidTransform::translation_only(Vec3::new(0.0, -19.0, 0.0));
        assert_eq!(t.apply(Vec3::ZERO), Vec3::new(0.0, -19.0, 0.0));
    }

    #[test]
    fn apply_rot_z_quarter_turn() {
        let t = RigidTransform::rotation_z_deg(90.0);
        assert!(close(t.apply(Vec3::new(1.0, 0.0, 0.0)), Vec3::new(0.0, 1.0, 0.0), 1e-15));
    }

    #[test]
    fn camera_origin_lands_on_offset() {
        let p = camera_to_delta(Vec3::ZERO, -50.0, -19.0);
        assert_eq!(p, Vec3::new(0.0, -19.0, 0.0));
    }

    #[test]
    fn zero_angle_zero_offset_is_identity() {
        let p = Vec3::new(1.5, -2.25, 7.0);
        assert_eq!(camera_to_delta(p, 0.0, 0.0), p);
    }

    #[test]
    fn inverse_round_trip() {
        let p = Vec3::new(10.0, 5.0, 20.0);
        let d = camera_to_delta_default(p);
        let back = delta_to_camera(d, CAMERA_PITCH_DEG, CAMERA_OFFSET_Y_CM);
        assert!(close(back, p, 1e-12));
    }

    #[test]
    fn compose_with_identity() {
        let t = RigidTransform::rotation_y_deg(33.0)
            .compose(&RigidTransform::translation_only(Vec3::new(1.0, 2.0, 3.0)));
        assert_eq!(RigidTransform::IDENTITY.compose(&t), t);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = RigidTransform::rotation_x_deg(-50.0)
            .compose(&RigidTransform::rotation_z_deg(12.0))
            .compose(&RigidTransform::translation_only(Vec3::new(4.0, -19.0, 2.5)));
        let id = t.compose(&t.inverse());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id.rotation().0[i][j] - want).abs() < 1e-9);
            }
        }
        assert!(id.translation().norm() < 1e-9);
    }

    #[test]
    fn rejects_reflection_and_shear() {
        let reflect = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]);
        assert!(matches!(
            RigidTransform::new(reflect, Vec3::ZERO),
            Err(GeometryError::Improper(_))
        ));
        let shear = Mat3([[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(matches!(
            RigidTransform::new(shear, Vec3::ZERO),
            Err(GeometryError::NotOrthonormal(_))
        ));
        assert!(RigidTransform::new(Mat3::IDENTITY, Vec3::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn deserialize_validates() {
        let ok = r#"{"rotation":[[1,0,0],[0,1,0],[0,0,1]],"translation":{"x":1,"y":2,"z":3}}"#;
        assert!(serde_json::from_str::<RigidTransform>(ok).is_ok());
        let bad = r#"{"rotation":[[2,0,0],[0,1,0],[0,0,1]],"translation":{"x":1,"y":2,"z":3}}"#;
        assert!(serde_json::from_str::<RigidTransform>(bad).is_err());
    }
}
