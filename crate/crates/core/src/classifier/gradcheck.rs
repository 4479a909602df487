//! Central finite-difference check of [`CnnModel::backward`].
//!
//! Every parameter is perturbed by ±h and the training-mode loss is
//! re-evaluated. Perturbing a dense-layer parameter only changes one unit,
//! so those evaluations recompute that unit and the layers after it from
//! cached activations. When a perturbation flips the sign of any ReLU input
//! the finite difference straddles a kink, so the step is shrunk tenfold
//! (down to `h·1e-4`) and the parameter is skipped if it still straddles.
//!
//! The two loss values each carry rounding error of a few ulp, so the
//! difference quotient cannot resolve gradients below roughly
//! `ε·|L| / h`. That allowance is subtracted from `|a − n|` before
//! normalizing.

use super::model::{CnnModel, ForwardCache, PARAM_NAMES};
use super::ClassifierError;
use crate::classifier::layers::relu_inplace;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const ABS_FLOOR: f64 = 1e-8;
const MAX_SHRINKS: usize = 4;
const ROUNDING_ULPS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: Option<(&'static str, usize)>,
    pub checked: usize,
    /// Parameters whose step was reduced to avoid a ReLU kink.
    pub kink_adjusted: usize,
    /// Parameters that straddled a kink at every step size.
    pub skipped: usize,
}

/// `max(0, |a − n| − allowance) / max(|a|, |n|)`, or zero when both
/// magnitudes are under [`ABS_FLOOR`].
pub fn relative_error(analytic: f64, numeric: f64, allowance: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < ABS_FLOOR {
        return 0.0;
    }
    ((analytic - numeric).abs() - allowance).max(0.0) / scale
}

/// Worst-case rounding contribution to a central difference of two losses.
pub fn rounding_allowance(loss_plus: f64, loss_minus: f64, step: f64) -> f64 {
    ROUNDING_ULPS * f64::EPSILON * loss_plus.abs().max(loss_minus.abs()) / (2.0 * step)
}

fn same_sign_pattern(base: &[f64], other: &[f64]) -> bool {
    base.iter().zip(other).all(|(a, b)| (*a > 0.0) == (*b > 0.0))
}

struct Evaluator<'a> {
    base: &'a ForwardCache,
    labels: &'a [usize],
}

impl Evaluator<'_> {
    /// Loss of `m` and whether every ReLU kept its sign relative to the base.
    fn eval(&self, m: &CnnModel, group: usize, index: usize) -> Result<(f64, bool), ClassifierError> {
        let b = self.base;
        let n = b.n;
        match group {
            0..=7 => {
                let c = m.forward_train(&b.input, n)?;
                let stable = same_sign_pattern(&b.block1, &c.block1)
                    && same_sign_pattern(&b.block2, &c.block2)
                    && same_sign_pattern(&b.hidden1, &c.hidden1)
                    && same_sign_pattern(&b.hidden2, &c.hidden2);
                Ok((m.batch_loss(&c.logits, self.labels), stable))
            }
            8 | 9 => {
                let fin = m.fc1.in_features();
                let fout = m.fc1.out_features();
                let unit = if group == 8 { index / fin } else { index };
                let mut hidden1 = b.hidden1.clone();
                for s in 0..n {
                    hidden1[s * fout + unit] = m.fc1.unit(&b.block2[s * fin..][..fin], unit).max(0.0);
                }
                let mut hidden2 = m.fc2.forward(&hidden1, n);
                relu_inplace(&mut hidden2);
                let stable = same_sign_pattern(&b.hidden1, &hidden1)
                    && same_sign_pattern(&b.hidden2, &hidden2);
                let logits = m.fc3.forward(&hidden2, n);
                Ok((m.batch_loss(&logits, self.labels), stable))
            }
            10 | 11 => {
                let fin = m.fc2.in_features();
                let fout = m.fc2.out_features();
                let unit = if group == 10 { index / fin } else { index };
                let mut hidden2 = b.hidden2.clone();
                for s in 0..n {
                    hidden2[s * fout + unit] = m.fc2.unit(&b.hidden1[s * fin..][..fin], unit).max(0.0);
                }
                let stable = same_sign_pattern(&b.hidden2, &hidden2);
                let logits = m.fc3.forward(&hidden2, n);
                Ok((m.batch_loss(&logits, self.labels), stable))
            }
            _ => {
                let fin = m.fc3.in_features();
                let c = m.num_classes();
                let unit = if group == 12 { index / fin } else { index };
                let mut logits = b.logits.clone();
                for s in 0..n {
                    logits[s * c + unit] = m.fc3.unit(&b.hidden2[s * fin..][..fin], unit);
                }
                Ok((m.batch_loss(&logits, self.labels), true))
            }
        }
    }
}

/// Compares analytic gradients of the mean cross-entropy over the batch
/// `x` (`n × 200`) against central differences with step `h`.
pub fn gradient_check(
    model: &CnnModel,
    x: &[f64],
    labels: &[usize],
    h: f64,
) -> Result<GradCheckReport, ClassifierError> {
    let base = model.forward_train(x, labels.len())?;
    let (_, grads) = model.backward(&base, labels)?;
    let ev = Evaluator { base: &base, labels };
    let mut work = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        checked: 0,
        kink_adjusted: 0,
        skipped: 0,
    };
    for (group, g) in grads.iter().enumerate() {
        for (index, &analytic) in g.iter().enumerate() {
            let original = work.params()[group].data()[index];
            let mut step = h;
            let mut numeric = None;
            let mut allowance = 0.0;
            for attempt in 0..=MAX_SHRINKS {
                work.params_mut()[group].data_mut()[index] = original + step;
                let (lp, sp) = ev.eval(&work, group, index)?;
                work.params_mut()[group].data_mut()[index] = original - step;
                let (lm, sm) = ev.eval(&work, group, index)?;
                work.params_mut()[group].data_mut()[index] = original;
                if sp && sm {
                    if attempt > 0 {
                        report.kink_adjusted += 1;
                    }
                    numeric = Some((lp - lm) / (2.0 * step));
                    allowance = rounding_allowance(lp, lm, step);
                    break;
                }
                step /= 10.0;
            }
            let Some(numeric) = numeric else {
                report.skipped += 1;
                continue;
            };
            report.checked += 1;
            let err = relative_error(analytic, numeric, allowance);
            if err > report.max_rel_error || err.is_nan() {
                report.max_rel_error = err;
                report.worst_param = Some((PARAM_NAMES[group], index));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::model::Architecture;
    use crate::tactile::{MisalignmentKind, FRAME_LEN};
    use rand::{Rng, SeedableRng};

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0, 0.0), 0.0);
        assert_eq!(relative_error(3e-11, -2e-11, 0.0), 0.0);
        assert!((relative_error(1e-8, 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((relative_error(2.0, 1.0, 0.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(2.0, 1.0, 0.5) - 0.25).abs() < 1e-15);
        assert_eq!(relative_error(1e-7, 1e-7 + 1e-11, 2e-11), 0.0);
    }

    #[test]
    fn incremental_matches_full_forward() {
        let arch = Architecture { conv1_channels: 3, conv2_channels: 4, fc1_units: 10, fc2_units: 7 };
        let mut m = CnnModel::randomized(MisalignmentKind::Vertical, arch, 9).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..2 * FRAME_LEN).map(|_| rng.random_range(0.0..9.0)).collect();
        let labels = [1, 4];
        let base = m.forward_train(&x, 2).unwrap();
        let ev = Evaluator { base: &base, labels: &labels };
        for group in 8..14 {
            for index in [0, m.params()[group].len() - 1] {
                m.params_mut()[group].data_mut()[index] += 0.01;
                let (fast, _) = ev.eval(&m, group, index).unwrap();
                let (full, _) = ev.eval(&m, 0, 0).unwrap();
                m.params_mut()[group].data_mut()[index] -= 0.01;
                assert!((fast - full).abs() < 1e-12, "group {group}: {fast} vs {full}");
            }
        }
    }

    #[test]
    fn small_network_passes() {
        let arch = Architecture { conv1_channels: 3, conv2_channels: 4, fc1_units: 10, fc2_units: 7 };
        let m = CnnModel::randomized(MisalignmentKind::Angular, arch, 4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..3 * FRAME_LEN).map(|_| rng.random_range(0.0..9.0)).collect();
        let r = gradient_check(&m, &x, &[0, 3, 5], DEFAULT_STEP).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
        assert_eq!(r.checked + r.skipped, m.num_parameters());
    }
}
