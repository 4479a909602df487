use mobile_charger::delta_kin::{in_workspace, DeltaGeometry};
use mobile_charger::search::{
    liveness_bound, run_search, run_search_traced, step, OutcomeReason, Phase, SearchSettings,
    SearchState, SearchTiming,
};
use mobile_charger::world::{nearest_valid_depth, DepthGrid, DetectorModel, WorldState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OMEGAS: [f64; 5] = [-20.0, -10.0, 0.0, 10.0, 20.0];

fn start(omega: f64) -> WorldState {
    WorldState::starting_position(omega, 25.0, 16.0)
}

#[test]
fn noiseless_succeeds_from_every_start() {
    for omega in OMEGAS {
        let o = run_search(&start(omega), &DetectorModel::noiseless(), 0);
        assert!(o.success, "ω={omega}: {o:?}");
        assert_eq!(o.reason, OutcomeReason::Reached);
        assert!(in_workspace(&DeltaGeometry::default(), o.final_target_delta_frame.unwrap()));
    }
}

#[test]
fn centered_noiseless_run_takes_fifteen_steps() {
    let o = run_search(&start(0.0), &DetectorModel::noiseless(), 0);
    assert_eq!(o.steps, 15);
    let t = o.final_target_delta_frame.unwrap();
    // 25 cm start, 14 cm of 1 cm moves, 4 cm final move.
    assert!((t.z - (25.0 - 14.0 - 4.0)).abs() < 1e-9, "{t:?}");
    assert!(t.x.abs() < 1e-9);
}

#[test]
fn sim_time_is_weighted_action_count() {
    let timing = SearchTiming::default();
    let (o, s, _) = run_search_traced(
        &start(10.0),
        &DetectorModel::noiseless(),
        0,
        &SearchSettings::default(),
    );
    // steps = rotations + 1 cm moves + one 4 cm move; solve for rotations.
    let motion = o.sim_time - s.detection_attempts as f64 * timing.detect_s - 4.0 * timing.advance_s_per_cm;
    let others = (o.steps - 1) as f64;
    let rotations = (motion - others * timing.advance_s_per_cm) / (timing.rotate_s - timing.advance_s_per_cm);
    assert!((rotations - rotations.round()).abs() < 1e-9, "{rotations}");
    // The bearing grows as the robot closes in, so more than 10 one-degree turns.
    assert!(rotations.round() >= 10.0, "{rotations}");
}

#[test]
fn golden_seed_42_omega_20() {
    let o = run_search(&start(20.0), &DetectorModel::default(), 42);
    let again = run_search(&start(20.0), &DetectorModel::default(), 42);
    assert_eq!(o, again);
    assert!(o.success, "{o:?}");
    assert_eq!(o.reason, OutcomeReason::Reached);
    assert!(o.steps >= 15 && o.steps <= liveness_bound(25.0));
}

#[test]
fn electrode_far_outside_view_fails_after_five_attempts() {
    let w = WorldState::starting_position(180.0, 25.0, 16.0);
    let (o, s, _) =
        run_search_traced(&w, &DetectorModel::default(), 9, &SearchSettings::default());
    assert!(!o.success);
    assert_eq!(o.reason, OutcomeReason::NotInView);
    assert_eq!(s.detection_attempts, 5);
    assert_eq!(o.steps, 0);
}

#[test]
fn unreachable_target_reported() {
    let g = DeltaGeometry { workspace_xy_halfrange: 0.01, ..DeltaGeometry::default() };
    let settings = SearchSettings { geometry: g, ..SearchSettings::default() };
    let (o, _, _) = run_search_traced(&start(20.0), &DetectorModel::noiseless(), 0, &settings);
    assert!(!o.success);
    assert_eq!(o.reason, OutcomeReason::Unreachable);
    assert!(o.final_target_delta_frame.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn terminates_within_liveness_bound(omega in -30.0..30.0f64, l in 12.0..30.0f64, seed in any::<u64>(), miss in 0.0..0.6f64) {
        let d = DetectorModel { miss_prob: miss, ..DetectorModel::default() };
        let w = WorldState::starting_position(omega, l, 16.0);
        let (_, s, _) = run_search_traced(&w, &d, seed, &SearchSettings::default());
        prop_assert!(s.phase == Phase::Done || s.phase == Phase::Failed);
        prop_assert!(s.steps <= liveness_bound(l));
    }

    #[test]
    fn replay_is_deterministic(omega in -20.0..20.0f64, seed in any::<u64>()) {
        let a = run_search(&start(omega), &DetectorModel::default(), seed);
        let b = run_search(&start(omega), &DetectorModel::default(), seed);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn noiseless_approach_is_monotone(omega in -20.0..20.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = DetectorModel::noiseless();
        let timing = SearchTiming::default();
        let mut s = SearchState::default();
        let mut w = start(omega);
        let mut last = w.planar_distance();
        while !s.phase.is_terminal() {
            (s, w) = step(&s, &w, &d, &timing, &mut rng).unwrap();
            let now = w.planar_distance();
            prop_assert!(now <= last + 1e-12);
            last = now;
        }
        prop_assert_eq!(s.phase, Phase::Done);
    }
}

/// Exhaustive nearest non-zero pixel with row-major tie-breaking.
fn brute_force_nearest(g: &DepthGrid, (r0, c0): (usize, usize)) -> Option<(usize, usize)> {
    let mut best: Option<(i64, usize, usize)> = None;
    for r in 0..g.rows() {
        for c in 0..g.cols() {
            if g.get(r, c) == 0.0 {
                continue;
            }
            let d2 = (r as i64 - r0 as i64).pow(2) + (c as i64 - c0 as i64).pow(2);
            if best.is_none_or(|(bd, _, _)| d2 < bd) {
                best = Some((d2, r, c));
            }
        }
    }
    best.map(|(_, r, c)| (r, c))
}

#[test]
fn nearest_depth_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..200 {
        let rows = rng.random_range(1..25);
        let cols = rng.random_range(1..25);
        let density = rng.random_range(0.01..0.5);
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| if rng.random_bool(density) { rng.random_range(0.1..5.0) } else { 0.0 })
            .collect();
        let g = DepthGrid::new(rows, cols, data).unwrap();
        let px = (rng.random_range(0..rows), rng.random_range(0..cols));
        match brute_force_nearest(&g, px) {
            Some(expect) => assert_eq!(nearest_valid_depth(&g, px).unwrap(), expect, "case {case}"),
            None => assert!(nearest_valid_depth(&g, px).is_err()),
        }
    }
}

#[test]
fn full_size_depth_frame() {
    let mut g = DepthGrid::filled(DepthGrid::DEFAULT_ROWS, DepthGrid::DEFAULT_COLS, 0.0).unwrap();
    g.set(470, 5, 1.2);
    assert_eq!(nearest_valid_depth(&g, (10, 830)).unwrap(), (470, 5));
}
