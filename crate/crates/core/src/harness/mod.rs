//! Configuration, Monte-Carlo experiment runner, metrics and persistence.

pub mod config;
pub mod detection;
pub mod experiment;
pub mod records;
pub mod stats;

use thiserror::Error;

pub use config::Config;
pub use detection::{detection_metrics, BBox, DetectionEval, DetectionMetrics, Prediction};
pub use experiment::{
    run_experiment, run_trials, success_rate, success_rate_by_omega, summarize, ClassifierBank,
    TrialRecord,
};
pub use records::{export, import, Format};
pub use stats::{one_way_anova, AnovaResult, StatsError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
    #[error("no trial records")]
    NoRecords,
    #[error(transparent)]
    Classifier(#[from] crate::classifier::ClassifierError),
    #[error(transparent)]
    Tactile(#[from] crate::tactile::TactileError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Format(e.to_string())
    }
}

impl HarnessError {
    /// Process exit code: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}
