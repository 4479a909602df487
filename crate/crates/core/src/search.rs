//! Electrode search controller and area exploration waypoints.
//!
//! The controller loops: detect, turn 1° toward the box center when it is off
//! the image center, then creep forward 1 cm. Once the box center is within
//! actuator reach (11 cm along the actuator axis) it makes one last 4 cm move
//! and hands the target to the actuator with 4 cm taken off its depth. Five
//! consecutive missed detections end the search.
//!
//! [`step`] performs a single action (one detection attempt, one rotation or
//! one move) so a caller can interleave the controller with other work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delta_kin::{self, DeltaGeometry};
use crate::geometry::Vec3;
use crate::world::{self, DetectorModel, Pose2, WorldState};

pub const MAX_DETECTION_ATTEMPTS: u32 = 5;
pub const ROTATION_STEP_DEG: f64 = 1.0;
pub const ADVANCE_STEP_CM: f64 = 1.0;
/// Deepest point along the actuator axis the end effector can dock at.
pub const REACH_CM: f64 = 11.0;
pub const FINAL_ADVANCE_CM: f64 = 4.0;
/// Bearing within which the box counts as centered on the image.
pub const CENTERING_TOL_DEG: f64 = 1.0;
/// Slack on the reach test so a box sitting exactly at 11 cm after float
/// round-off still counts.
const REACH_EPS: f64 = 1e-9;

pub const EXPLORATION_RADII_CM: [f64; 5] = [50.0, 100.0, 150.0, 200.0, 250.0];
pub const EXPLORATION_HEADINGS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("step called on terminal phase {0:?}")]
    InvalidState(Phase),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Detecting,
    Rotating,
    Advancing,
    FinalApproach,
    Done,
    Failed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeReason {
    Reached,
    NotInView,
    Unreachable,
}

impl OutcomeReason {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeReason::Reached => "Reached",
            OutcomeReason::NotInView => "NotInView",
            OutcomeReason::Unreachable => "Unreachable",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Reached" => Some(OutcomeReason::Reached),
            "NotInView" => Some(OutcomeReason::NotInView),
            "Unreachable" => Some(OutcomeReason::Unreachable),
            _ => None,
        }
    }
}

/// Simulated duration of each controller action, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchTiming {
    pub rotate_s: f64,
    pub advance_s_per_cm: f64,
    pub detect_s: f64,
}

impl Default for SearchTiming {
    fn default() -> Self {
        Self { rotate_s: 0.5, advance_s_per_cm: 1.0, detect_s: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchSettings {
    pub timing: SearchTiming,
    pub geometry: DeltaGeometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    /// The action the next [`step`] will perform, or a terminal phase.
    pub phase: Phase,
    pub attempts_left: u32,
    /// Rotations and moves performed so far.
    pub steps: u32,
    pub sim_time: f64,
    pub detection_attempts: u32,
    /// Box center of the latest detection, actuator frame.
    pub last_target: Option<Vec3>,
    /// Target handed to the actuator once the search is done.
    pub final_target: Option<Vec3>,
}

impl Default for SearchState {
    fn default() -> Self {
        Self {
            phase: Phase::Detecting,
            attempts_left: MAX_DETECTION_ATTEMPTS,
            steps: 0,
            sim_time: 0.0,
            detection_attempts: 0,
            last_target: None,
            final_target: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub success: bool,
    pub reason: OutcomeReason,
    pub steps: u32,
    pub sim_time: f64,
    pub final_target_delta_frame: Option<Vec3>,
}

/// Horizontal bearing of an actuator-frame point, degrees, positive to the
/// right.
pub fn bearing_deg(p_delta: Vec3) -> f64 {
    p_delta.x.atan2(p_delta.z).to_degrees()
}

fn within_reach(p_delta: Vec3) -> bool {
    p_delta.z <= REACH_CM + REACH_EPS
}

fn after_detection(target: Vec3) -> Phase {
    if bearing_deg(target).abs() > CENTERING_TOL_DEG {
        Phase::Rotating
    } else if within_reach(target) {
        Phase::FinalApproach
    } else {
        Phase::Advancing
    }
}

/// Performs the action named by `state.phase`.
pub fn step<R: rand::Rng + ?Sized>(
    state: &SearchState,
    w: &WorldState,
    d: &DetectorModel,
    timing: &SearchTiming,
    rng: &mut R,
) -> Result<(SearchState, WorldState), SearchError> {
    let mut s = *state;
    let mut w = *w;
    match s.phase {
        Phase::Done | Phase::Failed => return Err(SearchError::InvalidState(s.phase)),
        Phase::Detecting => {
            s.sim_time += timing.detect_s;
            s.detection_attempts += 1;
            let obs = world::observe(&w, d, rng);
            match obs.bbox_center_cam {
                Some(center) => {
                    s.attempts_left = MAX_DETECTION_ATTEMPTS;
                    let target = w.camera_to_delta(center);
                    s.last_target = Some(target);
                    s.phase = after_detection(target);
                }
                None => {
                    s.attempts_left = s.attempts_left.saturating_sub(1);
                    if s.attempts_left == 0 {
                        s.phase = Phase::Failed;
                    }
                }
            }
        }
        Phase::Rotating => {
            let target = s.last_target.expect("rotation follows a detection");
            let dir = bearing_deg(target).signum();
            w = world::rotate(&w, dir * ROTATION_STEP_DEG);
            s.steps += 1;
            s.sim_time += timing.rotate_s;
            s.phase = if within_reach(target) { Phase::FinalApproach } else { Phase::Advancing };
        }
        Phase::Advancing => {
            w = world::advance(&w, ADVANCE_STEP_CM);
            s.steps += 1;
            s.sim_time += ADVANCE_STEP_CM * timing.advance_s_per_cm;
            s.phase = Phase::Detecting;
        }
        Phase::FinalApproach => {
            let target = s.last_target.expect("final approach follows a detection");
            w = world::advance(&w, FINAL_ADVANCE_CM);
            s.steps += 1;
            s.sim_time += FINAL_ADVANCE_CM * timing.advance_s_per_cm;
            s.final_target = Some(target - Vec3::new(0.0, 0.0, FINAL_ADVANCE_CM));
            s.phase = Phase::Done;
        }
    }
    Ok((s, w))
}

/// Upper bound on actions for a start `l_cm` away: retries, two actions per
/// centimeter, and a full turn.
pub fn liveness_bound(l_cm: f64) -> u32 {
    MAX_DETECTION_ATTEMPTS + 2 * l_cm.max(0.0).ceil() as u32 + 360
}

/// Runs the controller to a terminal phase, returning the final state and
/// world alongside the outcome.
pub fn run_search_traced(
    w: &WorldState,
    d: &DetectorModel,
    seed: u64,
    settings: &SearchSettings,
) -> (SearchOutcome, SearchState, WorldState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SearchState::default();
    let mut world = *w;
    while !state.phase.is_terminal() {
        (state, world) = step(&state, &world, d, &settings.timing, &mut rng)
            .expect("loop guard keeps the phase non-terminal");
    }
    let outcome = match (state.phase, state.final_target) {
        (Phase::Done, Some(t)) if delta_kin::in_workspace(&settings.geometry, t) => SearchOutcome {
            success: true,
            reason: OutcomeReason::Reached,
            steps: state.steps,
            sim_time: state.sim_time,
            final_target_delta_frame: Some(t),
        },
        (Phase::Done, _) => SearchOutcome {
            success: false,
            reason: OutcomeReason::Unreachable,
            steps: state.steps,
            sim_time: state.sim_time,
            final_target_delta_frame: None,
        },
        _ => SearchOutcome {
            success: false,
            reason: OutcomeReason::NotInView,
            steps: state.steps,
            sim_time: state.sim_time,
            final_target_delta_frame: None,
        },
    };
    (outcome, state, world)
}

pub fn run_search_with(
    w: &WorldState,
    d: &DetectorModel,
    seed: u64,
    settings: &SearchSettings,
) -> SearchOutcome {
    run_search_traced(w, d, seed, settings).0
}

/// Runs the controller with default timing and actuator geometry.
pub fn run_search(w: &WorldState, d: &DetectorModel, seed: u64) -> SearchOutcome {
    run_search_with(w, d, seed, &SearchSettings::default())
}

/// Waypoints on concentric circles around `center`, innermost first. Each
/// waypoint sits along one of eight evenly spaced headings and faces along it.
pub fn exploration_waypoints(center: Pose2) -> Vec<Pose2> {
    let mut out = Vec::with_capacity(EXPLORATION_RADII_CM.len() * EXPLORATION_HEADINGS);
    for r in EXPLORATION_RADII_CM {
        for k in 0..EXPLORATION_HEADINGS {
            let heading = center.yaw + 360.0 * k as f64 / EXPLORATION_HEADINGS as f64;
            let (s, c) = heading.to_radians().sin_cos();
            out.push(Pose2::new(center.x + r * s, center.y + r * c, heading));
        }
    }
    out
}
