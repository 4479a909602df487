use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{argmax, Architecture, CnnModel};
use super::ClassifierError;
use crate::seed;
use crate::tactile::{Split, TactileDataset, TactileSample, FRAME_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 60,
            batch_size: 32,
            seed: 0,
            arch: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.momentum)
            && self.epochs > 0
            && self.batch_size > 0;
        if !ok {
            return Err(ClassifierError::InvalidConfig(format!("{self:?}")));
        }
        self.arch.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Checkpoint with the highest validation accuracy.
    pub model: CnnModel,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub history: Vec<EpochStats>,
}

fn stack(samples: &[&TactileSample]) -> (Vec<f64>, Vec<usize>) {
    let mut x = Vec::with_capacity(samples.len() * FRAME_LEN);
    let mut y = Vec::with_capacity(samples.len());
    for s in samples {
        x.extend(s.frame.to_flat());
        y.push(s.label.class_index);
    }
    (x, y)
}

/// Fraction of samples whose inference-mode argmax matches the label.
pub fn accuracy(model: &CnnModel, samples: &[&TactileSample]) -> Result<f64, ClassifierError> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let c = model.num_classes();
    let mut correct = 0;
    for chunk in samples.chunks(64) {
        let (x, y) = stack(chunk);
        let logits = model.forward_eval(&x, chunk.len())?;
        correct += y
            .iter()
            .enumerate()
            .filter(|(s, &label)| argmax(&logits[s * c..][..c]) == label)
            .count();
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// SGD with momentum on softmax cross-entropy. Each epoch shuffles the
/// training split with a seeded stream. Falls back to training accuracy for
/// checkpoint selection if the validation split is empty.
pub fn train(dataset: &TactileDataset, cfg: &TrainConfig) -> Result<TrainReport, ClassifierError> {
    cfg.validate()?;
    let train_set: Vec<&TactileSample> = dataset.split(Split::Train).collect();
    let val_set: Vec<&TactileSample> = dataset.split(Split::Validation).collect();
    if train_set.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let mut model = CnnModel::new(dataset.kind, cfg.arch, seed::derive(cfg.seed, &[0]))?;
    let mut velocity: Vec<Vec<f64>> = model.params().iter().map(|t| vec![0.0; t.len()]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[1]));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, CnnModel)> = None;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&TactileSample> = idx.iter().map(|&i| train_set[i]).collect();
            let (x, y) = stack(&batch);
            let cache = model.forward_train(&x, batch.len())?;
            let (loss, grads) = model.backward(&cache, &y)?;
            if !loss.is_finite() {
                return Err(ClassifierError::Diverged { epoch });
            }
            loss_sum += loss;
            batches += 1;
            for ((p, g), v) in model.params_mut().into_iter().zip(&grads).zip(&mut velocity) {
                for ((pv, gv), vv) in p.data_mut().iter_mut().zip(g).zip(v.iter_mut()) {
                    *vv = cfg.momentum * *vv + gv;
                    *pv -= cfg.learning_rate * *vv;
                }
            }
            let count1 = batch.len() * {
                let (h, w) = Architecture::conv1_hw();
                h * w
            };
            let count2 = batch.len() * {
                let (h, w) = Architecture::conv2_hw();
                h * w
            };
            model.bn1.update_running(&cache.bn1, count1);
            model.bn2.update_running(&cache.bn2, count2);
        }
        if model.params().iter().any(|t| !t.all_finite()) {
            return Err(ClassifierError::Diverged { epoch });
        }
        let train_accuracy = accuracy(&model, &train_set)?;
        let val_accuracy =
            if val_set.is_empty() { train_accuracy } else { accuracy(&model, &val_set)? };
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / batches as f64,
            train_accuracy,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|(acc, _, _)| val_accuracy > *acc) {
            best = Some((val_accuracy, epoch, model.clone()));
        }
    }
    let (best_val_accuracy, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainReport { model, best_epoch, best_val_accuracy, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tactile::{generate_dataset, MisalignmentKind};

    fn small_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            arch: Architecture { conv1_channels: 4, conv2_channels: 8, fc1_units: 32, fc2_units: 16 },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_noiseless_angular_classes() {
        let ds = generate_dataset(MisalignmentKind::Angular, 20, 0.0, 5).unwrap();
        let r = train(&ds, &small_cfg(15)).unwrap();
        assert!(r.best_val_accuracy >= 0.95, "{:?}", r.history.last());
        assert_eq!(r.history.len(), 15);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let ds = generate_dataset(MisalignmentKind::Vertical, 6, 0.4, 1).unwrap();
        let a = train(&ds, &small_cfg(2)).unwrap();
        let b = train(&ds, &small_cfg(2)).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let ds = generate_dataset(MisalignmentKind::Angular, 6, 0.4, 1).unwrap();
        let cfg = TrainConfig { learning_rate: 1e200, ..small_cfg(3) };
        assert!(matches!(train(&ds, &cfg), Err(ClassifierError::Diverged { .. })));
    }

    #[test]
    fn rejects_bad_config() {
        let ds = generate_dataset(MisalignmentKind::Angular, 2, 0.0, 1).unwrap();
        let cfg = TrainConfig { batch_size: 0, ..TrainConfig::default() };
        assert!(matches!(train(&ds, &cfg), Err(ClassifierError::InvalidConfig(_))));
    }
}
