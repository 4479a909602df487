use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::classifier::{TrainConfig, DEFAULT_CRITICAL_ANGLE_DEG};
use crate::delta_kin::DeltaGeometry;
use crate::search::{SearchSettings, SearchTiming};
use crate::world::{ChargerMount, DetectorModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    /// Initial charger-to-electrode distance, cm.
    pub l_cm: f64,
    pub stand_height: f64,
    pub mount: ChargerMount,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self { l_cm: 25.0, stand_height: 16.0, mount: ChargerMount::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TactileConfig {
    pub n_per_class: usize,
    /// Std-dev of per-taxel noise, N.
    pub noise_sigma: f64,
    pub dataset_seed: u64,
    pub critical_angle_deg: f64,
}

impl Default for TactileConfig {
    fn default() -> Self {
        Self {
            n_per_class: 100,
            noise_sigma: 0.4,
            dataset_seed: 0,
            critical_angle_deg: DEFAULT_CRITICAL_ANGLE_DEG,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub omegas_deg: Vec<f64>,
    pub trials_per_omega: usize,
    pub master_seed: u64,
    /// Run the tactile classification and safety gate after each successful
    /// docking.
    pub classify: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            omegas_deg: vec![-20.0, -10.0, 0.0, 10.0, 20.0],
            trials_per_omega: 20,
            master_seed: 42,
            classify: true,
        }
    }
}

/// Every tunable of the pipeline, as one JSON document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub delta_geometry: DeltaGeometry,
    pub detector: DetectorModel,
    pub world: WorldConfig,
    pub search_timing: SearchTiming,
    pub tactile: TactileConfig,
    pub train: TrainConfig,
    pub experiment: ExperimentConfig,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Config =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn search_settings(&self) -> SearchSettings {
        SearchSettings { timing: self.search_timing, geometry: self.delta_geometry }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.delta_geometry.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.detector.validate().map_err(HarnessError::Config)?;
        let w = &self.world;
        if !(w.l_cm.is_finite() && w.l_cm >= 0.0) {
            return bad(format!("world.l_cm must be finite and >= 0, got {}", w.l_cm));
        }
        if !w.stand_height.is_finite() || !w.mount.delta_height.is_finite() {
            return bad("world heights must be finite".into());
        }
        let t = &self.search_timing;
        if [t.rotate_s, t.advance_s_per_cm, t.detect_s].iter().any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return bad("search_timing values must be finite and >= 0".into());
        }
        let tc = &self.tactile;
        if tc.n_per_class == 0 {
            return bad("tactile.n_per_class must be >= 1".into());
        }
        if !(tc.noise_sigma.is_finite() && tc.noise_sigma >= 0.0) {
            return bad(format!("tactile.noise_sigma must be >= 0, got {}", tc.noise_sigma));
        }
        if !tc.critical_angle_deg.is_finite() {
            return bad("tactile.critical_angle_deg must be finite".into());
        }
        self.train.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let e = &self.experiment;
        if e.omegas_deg.is_empty() || e.omegas_deg.iter().any(|o| !o.is_finite()) {
            return bad("experiment.omegas_deg must be a non-empty list of finite angles".into());
        }
        if e.trials_per_omega == 0 {
            return bad("experiment.trials_per_omega must be >= 1".into());
        }
        Ok(())
    }
}
