//! Closed-form kinematics of the inverted-Delta actuator.
//!
//! Frame: origin at the center of the setup ring, +Z along the actuator axis
//! toward the target robot. Limb `i` sits at azimuth `120°·i` from +X.
//!
//! The inverted layout points the proximal arms toward the work zone and lets
//! the distal rods fold back, so the platform moves between the ring plane and
//! the elbow plane. A joint angle of 0° means the proximal arm is parallel to
//! +Z; positive angles swing the elbow radially outward.
//!
//! Default link lengths are synthetic: the real mechanism's dimensions are not
//! published. They are sized so the whole 120 × 120 × 110 mm working box is
//! reachable inside ±90° servo limits, see [`DeltaGeometry::check_box_corners`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

const LIMB_AZIMUTH_DEG: [f64; 3] = [0.0, 120.0, 240.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("target ({0:.3}, {1:.3}, {2:.3}) cm is outside the mechanism's reach")]
    Unreachable(f64, f64, f64),
    #[error("distal spheres do not intersect for the given joint angles")]
    NoIntersection,
    #[error("non-finite input")]
    NonFinite,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeltaGeometry {
    /// Radius of the circle through the three servo axes, cm.
    pub base_radius: f64,
    /// Radius of the circle through the three platform joints, cm.
    pub platform_radius: f64,
    /// Upper arm, cm.
    pub proximal_length: f64,
    /// Parallelogram rod, cm.
    pub distal_length: f64,
    pub workspace_xy_halfrange: f64,
    /// `(z_min, z_max)` of the working box, cm.
    pub workspace_z_range: (f64, f64),
    /// Servo travel `(min, max)`, degrees.
    pub joint_limits_deg: (f64, f64),
}

impl Default for DeltaGeometry {
    fn default() -> Self {
        Self {
            base_radius: 14.0,
            platform_radius: 3.0,
            proximal_length: 15.0,
            distal_length: 14.0,
            workspace_xy_halfrange: 6.0,
            workspace_z_range: (0.0, 11.0),
            joint_limits_deg: (-90.0, 90.0),
        }
    }
}

/// Actuated proximal-joint angles, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAngles {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl JointAngles {
    pub fn as_array(&self) -> [f64; 3] {
        [self.theta1, self.theta2, self.theta3]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self { theta1: a[0], theta2: a[1], theta3: a[2] }
    }
}

impl DeltaGeometry {
    /// Checks link-length invariants.
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let lengths = [
            ("base_radius", self.base_radius),
            ("platform_radius", self.platform_radius),
            ("proximal_length", self.proximal_length),
            ("distal_length", self.distal_length),
            ("workspace_xy_halfrange", self.workspace_xy_halfrange),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(KinematicsError::InvalidGeometry(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.distal_length <= (self.base_radius - self.platform_radius).abs() {
            return Err(KinematicsError::InvalidGeometry(
                "distal_length must exceed |base_radius - platform_radius|".into(),
            ));
        }
        let (z0, z1) = self.workspace_z_range;
        if !(z0.is_finite() && z1.is_finite() && z0 < z1) {
            return Err(KinematicsError::InvalidGeometry(format!("bad z range ({z0}, {z1})")));
        }
        let (lo, hi) = self.joint_limits_deg;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(KinematicsError::InvalidGeometry(format!("bad joint limits ({lo}, {hi})")));
        }
        Ok(())
    }

    pub fn box_corners(&self) -> [Vec3; 8] {
        let h = self.workspace_xy_halfrange;
        let (z0, z1) = self.workspace_z_range;
        let mut out = [Vec3::ZERO; 8];
        let mut k = 0;
        for &x in &[-h, h] {
            for &y in &[-h, h] {
                for &z in &[z0, z1] {
                    out[k] = Vec3::new(x, y, z);
                    k += 1;
                }
            }
        }
        out
    }

    /// Confirms every corner of the working box has an IK solution.
    pub fn check_box_corners(&self) -> Result<(), KinematicsError> {
        self.validate()?;
        for c in self.box_corners() {
            inverse_kinematics(self, c)?;
        }
        Ok(())
    }

    pub fn z_mid(&self) -> f64 {
        0.5 * (self.workspace_z_range.0 + self.workspace_z_range.1)
    }
}

fn wrap_pi(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Target expressed in the plane of limb `i`.
fn to_limb_frame(p: Vec3, azimuth_deg: f64) -> Vec3 {
    let (s, c) = azimuth_deg.to_radians().sin_cos();
    Vec3::new(c * p.x + s * p.y, -s * p.x + c * p.y, p.z)
}

/// Elbow-out root for one limb, radians, or `None` if the circle and sphere
/// do not meet.
fn solve_limb(g: &DeltaGeometry, t: Vec3) -> Option<f64> {
    let rp = g.proximal_length;
    let a = g.base_radius - g.platform_radius - t.x;
    // a·sinθ + b·cosθ = k
    let a_coef = 2.0 * a * rp;
    let b_coef = -2.0 * t.z * rp;
    let k = g.distal_length.powi(2) - rp * rp - a * a - t.y * t.y - t.z * t.z;
    let rho = a_coef.hypot(b_coef);
    if rho == 0.0 || k.abs() > rho {
        return None;
    }
    let phi = b_coef.atan2(a_coef);
    let s = (k / rho).asin();
    let r1 = wrap_pi(s - phi);
    let r2 = wrap_pi(PI - s - phi);
    Some(r1.max(r2))
}

pub fn inverse_kinematics(g: &DeltaGeometry, target: Vec3) -> Result<JointAngles, KinematicsError> {
    if !target.is_finite() {
        return Err(KinematicsError::NonFinite);
    }
    let unreachable = || KinematicsError::Unreachable(target.x, target.y, target.z);
    let (lo, hi) = g.joint_limits_deg;
    let mut out = [0.0; 3];
    for (slot, az) in out.iter_mut().zip(LIMB_AZIMUTH_DEG) {
        let theta = solve_limb(g, to_limb_frame(target, az)).ok_or_else(unreachable)?.to_degrees();
        if theta < lo || theta > hi {
            return Err(unreachable());
        }
        *slot = theta;
    }
    Ok(JointAngles::from_array(out))
}

/// Center of the sphere swept by the platform center for limb `i`: the elbow
/// pulled inward by the platform radius.
fn sphere_center(g: &DeltaGeometry, theta_deg: f64, azimuth_deg: f64) -> Vec3 {
    let (st, ct) = theta_deg.to_radians().sin_cos();
    let radial = g.base_radius + g.proximal_length * st - g.platform_radius;
    let (sa, ca) = azimuth_deg.to_radians().sin_cos();
    Vec3::new(radial * ca, radial * sa, g.proximal_length * ct)
}

/// Platform position from joint angles.
///
/// Of the two sphere intersections, returns the one between the ring plane and
/// the elbows, which is the branch the inverted layout works in.
pub fn forward_kinematics(g: &DeltaGeometry, j: JointAngles) -> Result<Vec3, KinematicsError> {
    let angles = j.as_array();
    if !angles.iter().all(|a| a.is_finite()) {
        return Err(KinematicsError::NonFinite);
    }
    let c1 = sphere_center(g, angles[0], LIMB_AZIMUTH_DEG[0]);
    let c2 = sphere_center(g, angles[1], LIMB_AZIMUTH_DEG[1]);
    let c3 = sphere_center(g, angles[2], LIMB_AZIMUTH_DEG[2]);
    let r = g.distal_length;

    let d12 = c2 - c1;
    let d = d12.norm();
    if d == 0.0 {
        return Err(KinematicsError::NoIntersection);
    }
    let ex = d12 * (1.0 / d);
    let d13 = c3 - c1;
    let i = ex.dot(d13);
    let ey_raw = d13 - ex * i;
    let ey_norm = ey_raw.norm();
    if ey_norm == 0.0 {
        return Err(KinematicsError::NoIntersection);
    }
    let ey = ey_raw * (1.0 / ey_norm);
    let mut ez = ex.cross(ey);
    let jj = ey.dot(d13);

    // Equal radii simplify the usual trilateration terms.
    let x = d / 2.0;
    let y = (i * i + jj * jj) / (2.0 * jj) - (i / jj) * x;
    let h2 = r * r - x * x - y * y;
    if h2 < 0.0 {
        if h2 > -1e-9 * r * r {
            return Ok(c1 + ex * x + ey * y);
        }
        return Err(KinematicsError::NoIntersection);
    }
    if ez.z < 0.0 {
        ez = -ez;
    }
    Ok(c1 + ex * x + ey * y - ez * h2.sqrt())
}

pub fn in_workspace(g: &DeltaGeometry, p: Vec3) -> bool {
    let h = g.workspace_xy_halfrange;
    let (z0, z1) = g.workspace_z_range;
    p.x.abs() <= h
        && p.y.abs() <= h
        && p.z >= z0
        && p.z <= z1
        && inverse_kinematics(g, p).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> DeltaGeometry {
        DeltaGeometry::default()
    }

    #[test]
    fn default_geometry_reaches_box() {
        g().check_box_corners().unwrap();
    }

    #[test]
    fn center_target_gives_equal_angles() {
        let j = inverse_kinematics(&g(), Vec3::new(0.0, 0.0, g().z_mid())).unwrap();
        assert!((j.theta1 - j.theta2).abs() < 1e-12);
        assert!((j.theta2 - j.theta3).abs() < 1e-12);
    }

    #[test]
    fn far_target_unreachable() {
        let z = 10.0 * g().workspace_z_range.1;
        assert!(matches!(
            inverse_kinematics(&g(), Vec3::new(0.0, 0.0, z)),
            Err(KinematicsError::Unreachable(..))
        ));
    }

    #[test]
    fn equal_angles_on_axis() {
        for th in [-40.0, -20.0, 0.0, 10.0] {
            let p = forward_kinematics(&g(), JointAngles::from_array([th; 3])).unwrap();
            assert!(p.x.abs() < 1e-9 && p.y.abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn round_trip_center() {
        let p = Vec3::new(0.0, 0.0, 5.5);
        let back = forward_kinematics(&g(), inverse_kinematics(&g(), p).unwrap()).unwrap();
        assert!((back - p).norm() < 1e-9);
    }

    #[test]
    fn workspace_membership() {
        let z = g().z_mid();
        assert!(in_workspace(&g(), Vec3::new(0.0, 0.0, z)));
        assert!(!in_workspace(&g(), Vec3::new(7.0, 0.0, z)));
        assert!(!in_workspace(&g(), Vec3::new(0.0, 0.0, -0.5)));
    }

    #[test]
    fn forward_kinematics_rejects_nan() {
        let j = JointAngles::from_array([f64::NAN, 0.0, 0.0]);
        assert_eq!(forward_kinematics(&g(), j), Err(KinematicsError::NonFinite));
    }

    #[test]
    fn forward_kinematics_no_intersection() {
        // Arms splayed fully outward pull the sphere centers too far apart.
        let bad = DeltaGeometry { distal_length: 11.5, ..g() };
        let j = JointAngles::from_array([90.0, 90.0, 90.0]);
        assert_eq!(forward_kinematics(&bad, j), Err(KinematicsError::NoIntersection));
    }

    #[test]
    fn geometry_validation() {
        assert!(g().validate().is_ok());
        assert!(DeltaGeometry { distal_length: 5.0, ..g() }.validate().is_err());
        assert!(DeltaGeometry { base_radius: -1.0, ..g() }.validate().is_err());
        assert!(DeltaGeometry { workspace_z_range: (3.0, 1.0), ..g() }.validate().is_err());
    }

    #[test]
    fn original_short_links_cannot_cover_box() {
        let short = DeltaGeometry {
            base_radius: 8.0,
            platform_radius: 3.0,
            proximal_length: 9.0,
            distal_length: 14.0,
            ..g()
        };
        assert!(short.check_box_corners().is_err());
    }
}
