use mobile_charger::delta_kin::{
    forward_kinematics, in_workspace, inverse_kinematics, DeltaGeometry, JointAngles,
};
use mobile_charger::geometry::{
    camera_to_delta, camera_to_delta_default, camera_to_delta_transform, delta_to_camera,
    RigidTransform, Vec3,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 4×4 homogeneous matrix written out from the rotation-about-X form.
fn oracle_matrix(theta_deg: f64, l: f64) -> [[f64; 4]; 4] {
    let t = theta_deg.to_radians();
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, t.cos(), -t.sin(), l],
        [0.0, t.sin(), t.cos(), 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn mat_vec4(m: &[[f64; 4]; 4], p: [f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (i, row) in m.iter().enumerate() {
        out[i] = row.iter().zip(p).map(|(a, b)| a * b).sum();
    }
    out
}

#[test]
fn camera_to_delta_matches_homogeneous_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = oracle_matrix(-50.0, -19.0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = Vec3::new(
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(0.0..100.0),
        );
        let q = mat_vec4(&m, [p.x, p.y, p.z, 1.0]);
        let got = camera_to_delta_default(p);
        worst = worst.max((got.x - q[0]).abs()).max((got.y - q[1]).abs()).max((got.z - q[2]).abs());
    }
    assert!(worst < 1e-12, "max error {worst}");
}

#[test]
fn homogeneous_form_matches_oracle_matrix() {
    let h = camera_to_delta_transform(-50.0, -19.0).to_homogeneous();
    let m = oracle_matrix(-50.0, -19.0);
    for i in 0..4 {
        for j in 0..4 {
            assert!((h[i][j] - m[i][j]).abs() < 1e-15);
        }
    }
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #[test]
    fn transform_is_rigid_and_keeps_x(a in vec3(), b in vec3(), theta in -180.0..180.0f64, l in -50.0..50.0f64) {
        let ta = camera_to_delta(a, theta, l);
        let tb = camera_to_delta(b, theta, l);
        prop_assert!((((ta - tb).norm()) - (a - b).norm()).abs() < 1e-9);
        prop_assert_eq!(ta.x, a.x);
    }

    #[test]
    fn inverse_round_trip(p in vec3(), theta in -180.0..180.0f64, l in -50.0..50.0f64) {
        let back = delta_to_camera(camera_to_delta(p, theta, l), theta, l);
        prop_assert!((back - p).norm() < 1e-9);
    }

    #[test]
    fn compose_applies_right_operand_first(p in vec3(), a in -90.0..90.0f64, b in -90.0..90.0f64, t in vec3()) {
        let first = RigidTransform::rotation_z_deg(a);
        let second = RigidTransform::rotation_x_deg(b).compose(&RigidTransform::translation_only(t));
        let combined = second.compose(&first);
        let step = second.apply(first.apply(p));
        prop_assert!((combined.apply(p) - step).norm() < 1e-9);
    }
}

fn random_workspace_point(g: &DeltaGeometry, rng: &mut ChaCha8Rng) -> Vec3 {
    let h = g.workspace_xy_halfrange;
    let (z0, z1) = g.workspace_z_range;
    Vec3::new(rng.random_range(-h..=h), rng.random_range(-h..=h), rng.random_range(z0..=z1))
}

#[test]
fn fk_inverts_ik_on_1000_points() {
    let g = DeltaGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = random_workspace_point(&g, &mut rng);
        let j = inverse_kinematics(&g, p).unwrap();
        let back = forward_kinematics(&g, j).unwrap();
        worst = worst.max((back - p).norm());
    }
    assert!(worst < 1e-9, "max error {worst}");
}

#[test]
fn workspace_box_corners_reachable() {
    let g = DeltaGeometry::default();
    assert_eq!(g.workspace_xy_halfrange * 2.0, 12.0);
    assert_eq!(g.workspace_z_range.1 - g.workspace_z_range.0, 11.0);
    for c in g.box_corners() {
        assert!(in_workspace(&g, c), "{c:?}");
        let j = inverse_kinematics(&g, c).unwrap();
        assert!(j.as_array().iter().all(|a| a.abs() <= 90.0));
    }
}

#[test]
fn rotating_target_by_120_degrees_permutes_joints() {
    let g = DeltaGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rot = RigidTransform::rotation_z_deg(120.0);
    for _ in 0..200 {
        let p = random_workspace_point(&g, &mut rng);
        let q = rot.apply(p);
        let (Ok(a), Ok(b)) = (inverse_kinematics(&g, p), inverse_kinematics(&g, q)) else {
            continue;
        };
        // Limb k sees q where limb k-1 saw p.
        assert!((b.theta2 - a.theta1).abs() < 1e-9);
        assert!((b.theta3 - a.theta2).abs() < 1e-9);
        assert!((b.theta1 - a.theta3).abs() < 1e-9);
    }
}

/// Largest joint angle in [-90°, 90°] closing the limb loop, by scan and
/// bisection on the distal-length residual.
fn bisection_joint(g: &DeltaGeometry, p: Vec3, azimuth_deg: f64) -> f64 {
    let (sa, ca) = azimuth_deg.to_radians().sin_cos();
    let u = Vec3::new(ca, sa, 0.0);
    let residual = |theta_deg: f64| {
        let (s, c) = theta_deg.to_radians().sin_cos();
        let elbow = u * g.base_radius + u * (g.proximal_length * s) + Vec3::new(0.0, 0.0, g.proximal_length * c);
        let joint = p + u * g.platform_radius;
        (elbow - joint).norm() - g.distal_length
    };
    let mut hi = 90.0;
    let mut lo = hi;
    while lo > -90.0 {
        lo -= 0.01;
        if residual(lo).signum() != residual(hi).signum() {
            break;
        }
        hi = lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid).signum() == residual(hi).signum() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn ik_matches_bisection_oracle() {
    let g = DeltaGeometry::default();
    for p in [Vec3::new(2.0, 3.0, 8.0), Vec3::new(-4.0, 1.0, 2.0), Vec3::new(0.0, -6.0, 10.5)] {
        let j = inverse_kinematics(&g, p).unwrap();
        for (got, az) in j.as_array().into_iter().zip([0.0, 120.0, 240.0]) {
            let expect = bisection_joint(&g, p, az);
            assert!((got - expect).abs() < 1e-9, "{p:?} limb {az}: {got} vs {expect}");
        }
    }
}

#[test]
fn fk_of_ik_reaches_joint_limits_consistently() {
    let g = DeltaGeometry::default();
    let j = JointAngles::from_array([0.0; 3]);
    let p = forward_kinematics(&g, j).unwrap();
    let back = inverse_kinematics(&g, p).unwrap();
    for a in back.as_array() {
        assert!(a.abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]
    #[test]
    fn ik_then_fk_identity(x in -6.0..6.0f64, y in -6.0..6.0f64, z in 0.0..11.0f64) {
        let g = DeltaGeometry::default();
        let p = Vec3::new(x, y, z);
        let j = inverse_kinematics(&g, p).unwrap();
        prop_assert!((forward_kinematics(&g, j).unwrap() - p).norm() < 1e-9);
    }
}
