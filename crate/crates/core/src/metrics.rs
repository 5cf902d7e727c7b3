//! Evaluation metrics: grid-threshold AUROC, exact AUROC, MSE and run aggregation.

use thiserror::Error;

/// Number of evenly spaced score thresholds in `[0, 1]`.
pub const ROC_POINTS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("AUROC is undefined when only one class is present")]
    SingleClass,
    #[error("length mismatch: {0} predictions vs {1} targets")]
    Length(usize, usize),
    #[error("need at least 2 runs to aggregate, got {0}")]
    TooFewRuns(usize),
    #[error("no values")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
}

fn class_counts(labels: &[u8]) -> Result<(usize, usize), MetricError> {
    let pos = labels.iter().filter(|&&l| l != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass);
    }
    Ok((pos, neg))
}

/// ROC points at [`ROC_POINTS`] thresholds; a score is positive iff `score >= t`.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::Length(scores.len(), labels.len()));
    }
    let (pos, neg) = class_counts(labels)?;
    let thresholds: Vec<f64> = (0..ROC_POINTS).map(|j| j as f64 / (ROC_POINTS - 1) as f64).collect();
    let mut fpr = Vec::with_capacity(ROC_POINTS);
    let mut tpr = Vec::with_capacity(ROC_POINTS);
    for &t in &thresholds {
        let (mut tp, mut fp) = (0usize, 0usize);
        for (&s, &l) in scores.iter().zip(labels) {
            if s >= t {
                if l != 0 {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        tpr.push(tp as f64 / pos as f64);
        fpr.push(fp as f64 / neg as f64);
    }
    Ok(RocCurve { thresholds, fpr, tpr })
}

/// Area under the threshold-grid ROC by a left Riemann sum over the points
/// sorted by false-positive rate.
pub fn auroc_riemann(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    let curve = roc_curve(scores, labels)?;
    let mut points: Vec<(f64, f64)> = curve.fpr.iter().copied().zip(curve.tpr.iter().copied()).collect();
    points.push((0.0, 0.0));
    points.push((1.0, 1.0));
    points.sort_by(|a, b| a.partial_cmp(b).expect("rates are finite"));
    let area = points.windows(2).map(|w| (w[1].0 - w[0].0) * w[0].1).sum::<f64>();
    Ok(area.clamp(0.0, 1.0))
}

/// Exact trapezoidal AUROC over every distinct score (ties count one half).
pub fn auroc_exact(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::Length(scores.len(), labels.len()));
    }
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (prev_tp, prev_fp) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] != 0 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        area += (fp - prev_fp) * (tp + prev_tp) / 2.0;
    }
    Ok(area / (pos as f64 * neg as f64))
}

pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64, MetricError> {
    if predictions.len() != targets.len() {
        return Err(MetricError::Length(predictions.len(), targets.len()));
    }
    if predictions.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(predictions.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / predictions.len() as f64)
}

/// Sample mean and sample standard deviation (`n − 1` denominator).
pub fn aggregate(runs: &[f64]) -> Result<(f64, f64), MetricError> {
    if runs.len() < 2 {
        return Err(MetricError::TooFewRuns(runs.len()));
    }
    let n = runs.len() as f64;
    let mean = runs.iter().sum::<f64>() / n;
    let var = runs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}
