//! One-way ANOVA with an in-house F-distribution tail.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} has fewer than 2 values")]
    GroupTooSmall(usize),
    #[error("non-finite observation in group {0}")]
    NonFinite(usize),
    #[error("zero within-group variance and equal group means")]
    DegenerateInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_statistic: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta, modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// `P(F > f)` for an F distribution with `(d1, d2)` degrees of freedom.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Classic one-way ANOVA. Zero within-group variance with unequal means
/// gives `F = ∞`, `p = 0`.
pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    for (i, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.len() < 2 {
            return Err(StatsError::GroupTooSmall(i));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(i));
        }
    }
    let total: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let means: Vec<f64> = groups.iter().map(|g| mean(g.as_ref())).collect();
    let grand = groups.iter().flat_map(|g| g.as_ref().iter()).sum::<f64>() / total as f64;
    let ss_between: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.as_ref().len() as f64 * (m - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.as_ref().iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let df_between = groups.len() - 1;
    let df_within = total - groups.len();
    let all_means_equal = means.iter().all(|m| *m == means[0]);
    let f_statistic = if ss_within == 0.0 {
        if all_means_equal {
            return Err(StatsError::DegenerateInput);
        }
        f64::INFINITY
    } else if all_means_equal {
        0.0
    } else {
        (ss_between / df_between as f64) / (ss_within / df_within as f64)
    };
    let p_value = f_survival(f_statistic, df_between as f64, df_within as f64);
    Ok(AnovaResult { f_statistic, df_between, df_within, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_integers() {
        let mut fact = 1.0f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "n={n}");
            fact *= n as f64;
        }
        let half = std::f64::consts::PI.sqrt().ln();
        assert!((ln_gamma(0.5) - half).abs() < 1e-13);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        for x in [0.1, 0.3, 0.5, 0.77, 0.95] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x) - x).abs() < 1e-14);
            let b = 3.0;
            let expect = 1.0 - (1.0 - x).powf(b);
            assert!((regularized_incomplete_beta(1.0, b, x) - expect).abs() < 1e-14);
            let a = 2.5;
            assert!((regularized_incomplete_beta(a, 1.0, x) - x.powf(a)).abs() < 1e-14);
        }
    }

    #[test]
    fn f_survival_two_two() {
        // F(2, 2): P(F > f) = 1 / (1 + f)
        for f in [0.1, 1.0, 3.5, 40.0] {
            assert!((f_survival(f, 2.0, 2.0) - 1.0 / (1.0 + f)).abs() < 1e-13);
        }
        assert_eq!(f_survival(0.0, 3.0, 7.0), 1.0);
        assert_eq!(f_survival(f64::INFINITY, 3.0, 7.0), 0.0);
    }

    #[test]
    fn identical_groups_have_zero_f() {
        let r = one_way_anova(&[vec![1.0, 2.0, 4.0], vec![1.0, 2.0, 4.0]]).unwrap();
        assert_eq!(r.f_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!((r.df_between, r.df_within), (1, 4));
    }

    #[test]
    fn degenerate_and_infinite_cases() {
        assert_eq!(
            one_way_anova(&[vec![2.0, 2.0], vec![2.0, 2.0]]),
            Err(StatsError::DegenerateInput)
        );
        let r = one_way_anova(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(r.f_statistic.is_infinite());
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn precondition_errors() {
        assert_eq!(one_way_anova(&[vec![1.0, 2.0]]), Err(StatsError::TooFewGroups(1)));
        assert_eq!(
            one_way_anova(&[vec![1.0, 2.0], vec![1.0]]),
            Err(StatsError::GroupTooSmall(1))
        );
        assert_eq!(
            one_way_anova(&[vec![1.0, f64::NAN], vec![1.0, 2.0]]),
            Err(StatsError::NonFinite(0))
        );
    }
}
