//! MCAR and MAR mask injection and top-up pollution of partially missing data.
//!
//! Only feature cells are ever masked; targets are left untouched.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::sigmoid;
use crate::dataset::TabularDataset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MissingnessError {
    #[error("missing rate {0} must lie in [0, 1)")]
    Rate(f64),
    #[error("feature {0} cannot drive its own missingness")]
    SelfDependency(usize),
    #[error("feature index {index} out of range for {n_features} features")]
    Feature { index: usize, n_features: usize },
    #[error("intrinsic missing rate {intrinsic:.4} already reaches the target rate {target:.4}")]
    AlreadyAtRate { intrinsic: f64, target: f64 },
    #[error("MAR mechanism needs at least one dependency rule")]
    NoDependencies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mcar,
    Mar,
    /// MAR at half the rate, then an MCAR top-up to the full rate.
    Mixture,
}

/// `P(target missing) = sigmoid(intercept + slope · z(driver))`, with `z` the
/// standardized driver value and the intercept calibrated to the rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarRule {
    pub target: usize,
    pub driver: usize,
    pub slope: f64,
}

/// Each feature `k` is driven by feature `k + 1` (wrapping).
pub fn cyclic_dependencies(n_features: usize, slope: f64) -> Vec<MarRule> {
    (0..n_features)
        .map(|k| MarRule {
            target: k,
            driver: (k + 1) % n_features,
            slope,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    pub target_rate: f64,
    pub seed: u64,
    /// Empty means a cyclic chain over all features with `mar_slope`.
    #[serde(default)]
    pub mar_dependency: Vec<MarRule>,
    #[serde(default = "default_slope")]
    pub mar_slope: f64,
    /// MAR share of a `Mixture`; `None` means half the target rate.
    #[serde(default)]
    pub mar_rate: Option<f64>,
}

fn default_slope() -> f64 {
    2.0
}

impl MissingnessSpec {
    pub fn mcar(rate: f64, seed: u64) -> Self {
        Self {
            mechanism: Mechanism::Mcar,
            target_rate: rate,
            seed,
            mar_dependency: Vec::new(),
            mar_slope: default_slope(),
            mar_rate: None,
        }
    }

    fn rules(&self, n_features: usize) -> Vec<MarRule> {
        if self.mar_dependency.is_empty() {
            cyclic_dependencies(n_features, self.mar_slope)
        } else {
            self.mar_dependency.clone()
        }
    }
}

fn check_rate(rate: f64) -> Result<(), MissingnessError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(MissingnessError::Rate(rate));
    }
    Ok(())
}

/// Masks each feature cell independently with probability `rate`.
pub fn inject_mcar(ds: &TabularDataset, rate: f64, seed: u64) -> Result<TabularDataset, MissingnessError> {
    check_rate(rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    for k in 0..out.mask.len() {
        if rng.gen::<f64>() < rate {
            out.mask[k] = 0;
            out.features[k] = 0.0;
        }
    }
    Ok(out)
}

/// Intercept `a` with `mean_i sigmoid(a + slope z_i) = rate`.
pub fn calibrate_intercept(z: &[f64], slope: f64, rate: f64) -> f64 {
    let mean_p = |a: f64| z.iter().map(|&zi| sigmoid(a + slope * zi)).sum::<f64>() / z.len() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn standardized_column(ds: &TabularDataset, col: usize) -> Vec<f64> {
    let observed: Vec<f64> = (0..ds.rows).filter_map(|r| ds.value(r, col)).collect();
    let n = observed.len().max(1) as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let sd = (observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    (0..ds.rows)
        .map(|r| match ds.value(r, col) {
            Some(v) if sd > 0.0 => (v - mean) / sd,
            _ => 0.0,
        })
        .collect()
}

/// Masks each rule's target with a logistic probability in its driver's value.
/// Probabilities are computed from the input values before any masking.
pub fn inject_mar(ds: &TabularDataset, rate: f64, seed: u64, rules: &[MarRule]) -> Result<TabularDataset, MissingnessError> {
    check_rate(rate)?;
    if rules.is_empty() {
        return Err(MissingnessError::NoDependencies);
    }
    let n = ds.n_features;
    for rule in rules {
        for index in [rule.target, rule.driver] {
            if index >= n {
                return Err(MissingnessError::Feature { index, n_features: n });
            }
        }
        if rule.driver == rule.target {
            return Err(MissingnessError::SelfDependency(rule.target));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probabilities: Vec<(usize, Vec<f64>)> = rules
        .iter()
        .map(|rule| {
            let z = standardized_column(ds, rule.driver);
            let a = calibrate_intercept(&z, rule.slope, rate);
            (rule.target, z.iter().map(|&zi| sigmoid(a + rule.slope * zi)).collect())
        })
        .collect();
    let mut out = ds.clone();
    for (target, p) in probabilities {
        for (r, &pr) in p.iter().enumerate() {
            if rng.gen::<f64>() < pr {
                out.mask_cell(r, target);
            }
        }
    }
    Ok(out)
}

/// Masks exactly `round((target − intrinsic) · cells)` currently observed
/// cells, chosen uniformly.
pub fn pollute_to_rate(ds: &TabularDataset, target_rate: f64, seed: u64) -> Result<TabularDataset, MissingnessError> {
    check_rate(target_rate)?;
    let intrinsic = ds.missing_rate();
    if intrinsic >= target_rate {
        return Err(MissingnessError::AlreadyAtRate {
            intrinsic,
            target: target_rate,
        });
    }
    let observed: Vec<usize> = (0..ds.mask.len()).filter(|&k| ds.mask[k] != 0).collect();
    let extra = (((target_rate - intrinsic) * ds.mask.len() as f64).round() as usize).min(observed.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    for pick in index::sample(&mut rng, observed.len(), extra) {
        let k = observed[pick];
        out.mask[k] = 0;
        out.features[k] = 0.0;
    }
    Ok(out)
}

/// Applies a full spec. A dataset that already has missing cells is topped up
/// to the target rate with MCAR pollution.
pub fn apply(ds: &TabularDataset, spec: &MissingnessSpec) -> Result<TabularDataset, MissingnessError> {
    check_rate(spec.target_rate)?;
    let intrinsic = ds.missing_rate();
    match spec.mechanism {
        Mechanism::Mcar if intrinsic > 0.0 => pollute_to_rate(ds, spec.target_rate, spec.seed),
        Mechanism::Mcar => inject_mcar(ds, spec.target_rate, spec.seed),
        Mechanism::Mar => inject_mar(ds, spec.target_rate, spec.seed, &spec.rules(ds.n_features)),
        Mechanism::Mixture => {
            let share = spec.mar_rate.unwrap_or(spec.target_rate / 2.0).min(spec.target_rate);
            let mar = inject_mar(ds, share, spec.seed, &spec.rules(ds.n_features))?;
            if mar.missing_rate() >= spec.target_rate {
                Ok(mar)
            } else {
                pollute_to_rate(&mar, spec.target_rate, spec.seed.wrapping_add(1))
            }
        }
    }
}

/// Sample covariance of `x_k` (complete values) with the missingness indicator
/// of column `k` in `masked`, plus its standard error.
pub fn mask_covariance(complete: &TabularDataset, masked: &TabularDataset, col: usize) -> (f64, f64) {
    let n = complete.rows as f64;
    let x: Vec<f64> = (0..complete.rows).map(|r| complete.features[r * complete.n_features + col]).collect();
    let m: Vec<f64> = (0..masked.rows)
        .map(|r| f64::from(u8::from(masked.mask[r * masked.n_features + col] == 0)))
        .collect();
    let mx = x.iter().sum::<f64>() / n;
    let mm = m.iter().sum::<f64>() / n;
    let products: Vec<f64> = x.iter().zip(&m).map(|(a, b)| (a - mx) * (b - mm)).collect();
    let cov = products.iter().sum::<f64>() / (n - 1.0);
    let var = products.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (n - 1.0);
    (cov, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn zero_rate_masks_nothing() {
        let ds = synthetic::correlated_gaussians(100, 3, 0.0, 1);
        assert_eq!(inject_mcar(&ds, 0.0, 4).unwrap().mask, ds.mask);
    }

    #[test]
    fn mcar_is_deterministic_and_rejects_full_rate() {
        let ds = synthetic::correlated_gaussians(100, 3, 0.0, 1);
        assert_eq!(inject_mcar(&ds, 0.4, 9).unwrap(), inject_mcar(&ds, 0.4, 9).unwrap());
        assert_eq!(inject_mcar(&ds, 1.0, 9), Err(MissingnessError::Rate(1.0)));
    }

    #[test]
    fn mar_rejects_self_dependency() {
        let ds = synthetic::correlated_gaussians(50, 3, 0.0, 1);
        let rules = [MarRule {
            target: 1,
            driver: 1,
            slope: 1.0,
        }];
        assert_eq!(inject_mar(&ds, 0.3, 0, &rules), Err(MissingnessError::SelfDependency(1)));
    }

    #[test]
    fn mar_calibrates_marginal_rate() {
        let ds = synthetic::correlated_gaussians(10_000, 3, 0.5, 2);
        let out = inject_mar(&ds, 0.4, 5, &cyclic_dependencies(3, 2.0)).unwrap();
        assert!((out.missing_rate() - 0.4).abs() <= 0.01, "{}", out.missing_rate());
    }

    #[test]
    fn flat_slope_is_mcar_rate() {
        let z = [-1.0, 0.0, 2.0];
        let a = calibrate_intercept(&z, 0.0, 0.3);
        assert!((sigmoid(a) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn pollution_keeps_intrinsic_cells_and_hits_rate() {
        let ds = synthetic::correlated_gaussians(600, 5, 0.0, 1);
        let base = inject_mcar(&ds, 0.1, 3).unwrap();
        let out = pollute_to_rate(&base, 0.5, 4).unwrap();
        assert!((out.missing_rate() - 0.5).abs() < 1e-3);
        for k in 0..base.mask.len() {
            if base.mask[k] == 0 {
                assert_eq!(out.mask[k], 0);
            }
        }
        assert!(matches!(pollute_to_rate(&out, 0.3, 0), Err(MissingnessError::AlreadyAtRate { .. })));
    }

    #[test]
    fn labels_never_masked() {
        let ds = synthetic::correlated_gaussians(200, 4, 0.3, 1);
        let spec = MissingnessSpec {
            mechanism: Mechanism::Mixture,
            ..MissingnessSpec::mcar(0.6, 3)
        };
        let out = apply(&ds, &spec).unwrap();
        assert_eq!(out.target, ds.target);
        assert!((out.missing_rate() - 0.6).abs() < 0.01);
    }

    #[test]
    fn mixture_mar_share_then_mcar_top_up() {
        let ds = synthetic::correlated_gaussians(2_000, 5, 0.4, 2);
        let spec = MissingnessSpec {
            mechanism: Mechanism::Mixture,
            mar_rate: Some(0.0335),
            ..MissingnessSpec::mcar(0.4, 5)
        };
        let out = apply(&ds, &spec).unwrap();
        assert!((out.missing_rate() - 0.4).abs() < 0.01);
        let mar = inject_mar(&ds, 0.0335, 5, &spec.rules(ds.n_features)).unwrap();
        assert!(mar.mask.iter().zip(&out.mask).all(|(a, b)| b <= a));
    }
}
