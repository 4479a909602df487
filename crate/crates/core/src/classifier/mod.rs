//! Tactile misalignment classifier: a small CNN trained from scratch.

pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod tensor;
pub mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gradcheck::{gradient_check, GradCheckReport};
pub use model::{Architecture, CnnModel};
pub use tensor::Tensor;
pub use train::{train, TrainConfig, TrainReport};

use crate::tactile::{MisalignmentKind, MisalignmentLabel};

pub const DEFAULT_CRITICAL_ANGLE_DEG: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("training split is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("safety gate needs an angular label, got {0}")]
    WrongKind(MisalignmentKind),
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u32),
    #[error("model json: {0}")]
    Json(String),
    #[error("io: {0}")]
    Io(String),
}

/// Inference-mode argmax over the classes of `model`.
pub fn classify(model: &CnnModel, frame: &Tensor) -> Result<MisalignmentLabel, ClassifierError> {
    model.classify(frame)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateDecision {
    Charge,
    Abort,
}

/// Charging proceeds only when the classified tilt is below `critical_deg`.
pub fn safety_gate(label: MisalignmentLabel, critical_deg: f64) -> Result<GateDecision, ClassifierError> {
    if label.kind != MisalignmentKind::Angular {
        return Err(ClassifierError::WrongKind(label.kind));
    }
    Ok(if label.value() < critical_deg { GateDecision::Charge } else { GateDecision::Abort })
}
