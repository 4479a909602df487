use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::Config;
use super::stats::{one_way_anova, AnovaResult};
use super::HarnessError;
use crate::classifier::{
    safety_gate, train, CnnModel, GateDecision, Tensor, TrainConfig, TrainReport,
};
use crate::search::{run_search_with, SearchOutcome};
use crate::seed;
use crate::tactile::{generate_dataset, synthesize_label, MisalignmentKind, MisalignmentLabel};
use crate::world::WorldState;

/// Misalignment drawn for a docked trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueMisalignment {
    pub phi_deg: f64,
    pub dx_mm: f64,
    pub dy_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedMisalignment {
    pub angular: MisalignmentLabel,
    pub vertical: MisalignmentLabel,
    pub horizontal: MisalignmentLabel,
}

/// One search-and-dock trial. Tactile fields are set only for successful
/// trials run with classification enabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub omega_deg: f64,
    pub l_cm: f64,
    pub seed: u64,
    pub outcome: SearchOutcome,
    pub misalignment_true: Option<TrueMisalignment>,
    pub misalignment_predicted: Option<PredictedMisalignment>,
    pub gate: Option<GateDecision>,
    pub sim_time: f64,
    pub steps: u32,
}

/// One trained model per misalignment kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierBank {
    pub angular: CnnModel,
    pub vertical: CnnModel,
    pub horizontal: CnnModel,
}

impl ClassifierBank {
    pub fn get(&self, kind: MisalignmentKind) -> &CnnModel {
        match kind {
            MisalignmentKind::Angular => &self.angular,
            MisalignmentKind::Vertical => &self.vertical,
            MisalignmentKind::Horizontal => &self.horizontal,
        }
    }

    /// Trains all three models on freshly generated datasets.
    pub fn train(cfg: &Config) -> Result<(Self, [TrainReport; 3]), HarnessError> {
        let mut reports = Vec::with_capacity(3);
        for (k, kind) in MisalignmentKind::ALL.into_iter().enumerate() {
            let ds = generate_dataset(
                kind,
                cfg.tactile.n_per_class,
                cfg.tactile.noise_sigma,
                seed::derive(cfg.tactile.dataset_seed, &[k as u64]),
            )?;
            let tc = TrainConfig { seed: seed::derive(cfg.train.seed, &[k as u64]), ..cfg.train };
            reports.push(train(&ds, &tc)?);
        }
        let reports: [TrainReport; 3] = reports.try_into().expect("three kinds");
        let bank = Self {
            angular: reports[0].model.clone(),
            vertical: reports[1].model.clone(),
            horizontal: reports[2].model.clone(),
        };
        Ok((bank, reports))
    }

    pub fn save_dir(&self, dir: &std::path::Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        for kind in MisalignmentKind::ALL {
            self.get(kind).save(&dir.join(format!("{kind}.json")))?;
        }
        Ok(())
    }

    pub fn load_dir(dir: &std::path::Path) -> Result<Self, HarnessError> {
        let load = |kind: MisalignmentKind| -> Result<CnnModel, HarnessError> {
            let m = CnnModel::load(&dir.join(format!("{kind}.json")))?;
            if m.kind != kind {
                return Err(HarnessError::Config(format!("{kind}.json holds a {} model", m.kind)));
            }
            Ok(m)
        };
        Ok(Self {
            angular: load(MisalignmentKind::Angular)?,
            vertical: load(MisalignmentKind::Vertical)?,
            horizontal: load(MisalignmentKind::Horizontal)?,
        })
    }
}

/// Seed for trial `trial` at grid position `omega_index`.
pub fn trial_seed(master: u64, omega_index: usize, trial: usize) -> u64 {
    seed::derive(master, &[omega_index as u64, trial as u64])
}

fn draw_label<R: Rng>(kind: MisalignmentKind, rng: &mut R) -> MisalignmentLabel {
    MisalignmentLabel::new(kind, rng.random_range(0..kind.num_classes())).expect("in range")
}

/// Runs the trial grid. Classification happens only when `bank` is given.
pub fn run_trials(cfg: &Config, bank: Option<&ClassifierBank>) -> Result<Vec<TrialRecord>, HarnessError> {
    cfg.validate()?;
    let settings = cfg.search_settings();
    let e = &cfg.experiment;
    let mut records = Vec::with_capacity(e.omegas_deg.len() * e.trials_per_omega);
    for (oi, &omega) in e.omegas_deg.iter().enumerate() {
        for t in 0..e.trials_per_omega {
            let s = trial_seed(e.master_seed, oi, t);
            let mut world = WorldState::starting_position(omega, cfg.world.l_cm, cfg.world.stand_height);
            world.mount = cfg.world.mount;
            world.rng_seed = s;
            let outcome = run_search_with(&world, &cfg.detector, seed::derive(s, &[0]), &settings);
            let mut rec = TrialRecord {
                trial_id: oi * e.trials_per_omega + t,
                omega_deg: omega,
                l_cm: cfg.world.l_cm,
                seed: s,
                outcome,
                misalignment_true: None,
                misalignment_predicted: None,
                gate: None,
                sim_time: outcome.sim_time,
                steps: outcome.steps,
            };
            if let (true, Some(bank)) = (outcome.success, bank) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(s, &[1]));
                let truth = [
                    draw_label(MisalignmentKind::Angular, &mut rng),
                    draw_label(MisalignmentKind::Vertical, &mut rng),
                    draw_label(MisalignmentKind::Horizontal, &mut rng),
                ];
                let mut predicted = Vec::with_capacity(3);
                for label in truth {
                    let frame = synthesize_label(label, cfg.tactile.noise_sigma, &mut rng);
                    predicted.push(bank.get(label.kind).classify(&Tensor::from(&frame))?);
                }
                rec.misalignment_true = Some(TrueMisalignment {
                    phi_deg: truth[0].value(),
                    dy_mm: truth[1].value(),
                    dx_mm: truth[2].value(),
                });
                rec.gate = Some(safety_gate(predicted[0], cfg.tactile.critical_angle_deg)?);
                rec.misalignment_predicted = Some(PredictedMisalignment {
                    angular: predicted[0],
                    vertical: predicted[1],
                    horizontal: predicted[2],
                });
            }
            records.push(rec);
        }
    }
    Ok(records)
}

/// Full pipeline: trains the classifiers when `experiment.classify` is set,
/// then runs every trial.
pub fn run_experiment(cfg: &Config) -> Result<Vec<TrialRecord>, HarnessError> {
    if cfg.experiment.classify {
        let (bank, _) = ClassifierBank::train(cfg)?;
        run_trials(cfg, Some(&bank))
    } else {
        run_trials(cfg, None)
    }
}

pub fn success_rate(records: &[TrialRecord]) -> Result<f64, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::NoRecords);
    }
    Ok(records.iter().filter(|r| r.outcome.success).count() as f64 / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaRate {
    pub omega_deg: f64,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
}

/// Per-ω success rates in order of first appearance.
pub fn success_rate_by_omega(records: &[TrialRecord]) -> Result<Vec<OmegaRate>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::NoRecords);
    }
    let mut out: Vec<OmegaRate> = Vec::new();
    for r in records {
        let slot = match out.iter_mut().find(|o| o.omega_deg == r.omega_deg) {
            Some(s) => s,
            None => {
                out.push(OmegaRate { omega_deg: r.omega_deg, trials: 0, successes: 0, rate: 0.0 });
                out.last_mut().unwrap()
            }
        };
        slot.trials += 1;
        slot.successes += usize::from(r.outcome.success);
    }
    for o in &mut out {
        o.rate = o.successes as f64 / o.trials as f64;
    }
    Ok(out)
}

/// Groups a per-record value by ω, in order of first appearance.
pub fn group_by_omega<F>(records: &[TrialRecord], value: F) -> Vec<(f64, Vec<f64>)>
where
    F: Fn(&TrialRecord) -> Option<f64>,
{
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for r in records {
        let idx = match groups.iter().position(|(o, _)| *o == r.omega_deg) {
            Some(i) => i,
            None => {
                groups.push((r.omega_deg, Vec::new()));
                groups.len() - 1
            }
        };
        if let Some(v) = value(r) {
            groups[idx].1.push(v);
        }
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub trials: usize,
    pub success_rate: f64,
    pub per_omega: Vec<OmegaRate>,
    /// ANOVA of success indicators across ω, or why it could not be computed.
    pub anova_success: Result<AnovaResult, String>,
    /// ANOVA of simulated time of successful trials across ω.
    pub anova_time: Result<AnovaResult, String>,
    pub mean_sim_time_success: Option<f64>,
    pub gate_charge: usize,
    pub gate_abort: usize,
    /// Fraction of gated trials whose angular class was predicted exactly.
    pub angular_accuracy: Option<f64>,
}

pub fn summarize(records: &[TrialRecord]) -> Result<ExperimentSummary, HarnessError> {
    let success = group_by_omega(records, |r| Some(f64::from(u8::from(r.outcome.success))));
    let times = group_by_omega(records, |r| r.outcome.success.then_some(r.sim_time));
    let anova = |g: &[(f64, Vec<f64>)]| {
        let vals: Vec<&[f64]> = g.iter().map(|(_, v)| v.as_slice()).collect();
        one_way_anova(&vals).map_err(|e| e.to_string())
    };
    let ok_times: Vec<f64> = times.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let predicted: Vec<(&TrueMisalignment, &PredictedMisalignment)> = records
        .iter()
        .filter_map(|r| r.misalignment_true.as_ref().zip(r.misalignment_predicted.as_ref()))
        .collect();
    let angular_hits = predicted.iter().filter(|(t, p)| p.angular.value() == t.phi_deg).count();
    Ok(ExperimentSummary {
        trials: records.len(),
        success_rate: success_rate(records)?,
        per_omega: success_rate_by_omega(records)?,
        anova_success: anova(&success),
        anova_time: anova(&times),
        mean_sim_time_success: (!ok_times.is_empty())
            .then(|| ok_times.iter().sum::<f64>() / ok_times.len() as f64),
        gate_charge: records.iter().filter(|r| r.gate == Some(GateDecision::Charge)).count(),
        gate_abort: records.iter().filter(|r| r.gate == Some(GateDecision::Abort)).count(),
        angular_accuracy: (!predicted.is_empty())
            .then(|| angular_hits as f64 / predicted.len() as f64),
    })
}
