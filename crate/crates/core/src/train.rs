//! Joint training of a front-end with the downstream predictor: Adam,
//! class-weighted cross-entropy (or MSE), early stopping on validation loss.

use std::fmt::Write as _;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autodiff::{Graph, Var};
use crate::dataset::{TabularDataset, Task};
use crate::frontend::{FrontEnd, FrontEndError, FrontEndOptions, InputBatch, Method};
use crate::nn::{Activation, Bound, Mlp, ParamSet};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("class weights need at least two classes, found {0}")]
    SingleClass(usize),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (gate {gate:?})")]
    NonFinite { epoch: usize, batch: usize, gate: Option<f64> },
    #[error(transparent)]
    FrontEnd(#[from] FrontEndError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 200,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 20,
            seed: 0,
            hidden_layers: 4,
            hidden_width: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.patience == 0 {
            return bad("batch_size, epochs and patience must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if self.hidden_width == 0 {
            return bad("hidden_width must be at least 1");
        }
        Ok(())
    }
}

/// `rows / (classes · count_c)` for every class `0..=max label`.
pub fn class_weights(labels: &[u8]) -> Result<Vec<f64>, TrainError> {
    let classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l as usize] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(TrainError::SingleClass(present));
    }
    let rows = labels.len() as f64;
    Ok(counts
        .iter()
        .map(|&c| if c > 0 { rows / (present as f64 * c as f64) } else { 0.0 })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.value.numel()]).collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut ParamSet, grads: &[Vec<f64>], state: &mut AdamState, config: &TrainConfig) {
    assert_eq!(grads.len(), params.len(), "one gradient per parameter");
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for (((w, &gi), mi), vi) in p.value.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
}

/// Front-end plus downstream MLP sharing one parameter set.
#[derive(Debug, Clone)]
pub struct Model {
    pub front: FrontEnd,
    pub downstream: Mlp,
    pub params: ParamSet,
    pub task: Task,
}

impl Model {
    pub fn build(
        method: Method,
        n_features: usize,
        options: &FrontEndOptions,
        config: &TrainConfig,
        task: Task,
    ) -> Result<Self, TrainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let front = FrontEnd::build(method, n_features, options, &mut params, &mut rng)?;
        let mut widths = vec![front.output_dim()];
        widths.extend(std::iter::repeat(config.hidden_width).take(config.hidden_layers));
        widths.push(1);
        let head = match task {
            Task::Classification => Activation::Sigmoid,
            Task::Regression => Activation::Identity,
        };
        let downstream = Mlp::new(&mut params, "dsm", &widths, Activation::Selu, head, &mut rng);
        Ok(Self {
            front,
            downstream,
            params,
            task,
        })
    }

    /// `[rows, 1]` predictions.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, batch: &InputBatch) -> Result<Var, TrainError> {
        let h = self.front.forward(g, bound, batch)?;
        Ok(self.downstream.forward(g, bound, h)?)
    }

    pub fn gate(&self) -> Option<f64> {
        self.front.gate(&self.params)
    }

    /// Predictions for `rows` of `ds`, evaluated in chunks without gradients.
    pub fn predict(&self, ds: &TabularDataset, rows: &[usize]) -> Result<Vec<f64>, TrainError> {
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(256) {
            let batch = input_batch(ds, chunk);
            let mut g = Graph::new();
            let bound = self.params.bind_frozen(&mut g);
            let p = self.forward(&mut g, &bound, &batch)?;
            out.extend_from_slice(g.value(p).data());
        }
        Ok(out)
    }

    fn loss(&self, g: &mut Graph, pred: Var, targets: &[f64], weights: &[f64]) -> Result<Var, TensorError> {
        match self.task {
            Task::Classification => {
                let w: Vec<f64> = targets.iter().map(|&t| weights[t as usize]).collect();
                g.weighted_bce(pred, targets, &w)
            }
            Task::Regression => g.mse(pred, targets),
        }
    }

    /// Mean loss over `rows` with fixed parameters.
    pub fn evaluate_loss(&self, ds: &TabularDataset, rows: &[usize], weights: &[f64]) -> Result<f64, TrainError> {
        let mut total = 0.0;
        for chunk in rows.chunks(256) {
            let batch = input_batch(ds, chunk);
            let targets: Vec<f64> = chunk.iter().map(|&r| ds.target[r]).collect();
            let mut g = Graph::new();
            let bound = self.params.bind_frozen(&mut g);
            let p = self.forward(&mut g, &bound, &batch)?;
            let l = self.loss(&mut g, p, &targets, weights)?;
            total += g.value(l).item() * chunk.len() as f64;
        }
        Ok(total / rows.len().max(1) as f64)
    }

    /// One forward/backward on a batch; returns the loss and per-parameter gradients.
    pub fn loss_and_grads(
        &self,
        ds: &TabularDataset,
        rows: &[usize],
        weights: &[f64],
    ) -> Result<(f64, Vec<Vec<f64>>), TrainError> {
        let batch = input_batch(ds, rows);
        let targets: Vec<f64> = rows.iter().map(|&r| ds.target[r]).collect();
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g);
        let p = self.forward(&mut g, &bound, &batch)?;
        let l = self.loss(&mut g, p, &targets, weights)?;
        let value = g.value(l).item();
        if !value.is_finite() {
            return Ok((value, Vec::new()));
        }
        g.backward(l)?;
        Ok((value, self.params.grads(&g, &bound)))
    }
}

/// Batch of `rows` from `ds` in the given order.
pub fn input_batch(ds: &TabularDataset, rows: &[usize]) -> InputBatch {
    let mut batch = InputBatch::new(ds.n_features);
    for &r in rows {
        let (v, m) = ds.row(r);
        batch.push(v, m);
    }
    batch
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    /// Sorted row ids that influenced parameters or statistics.
    pub rows_seen: Vec<usize>,
}

/// Trains `model` in place on `train_rows`, restoring the parameters of the
/// epoch with the lowest validation loss.
pub fn train(
    model: &mut Model,
    ds: &TabularDataset,
    train_rows: &[usize],
    val_rows: &[usize],
    config: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    if train_rows.is_empty() {
        return Err(TrainError::Config("no training rows".into()));
    }
    let weights = match model.task {
        Task::Classification => {
            let labels: Vec<u8> = train_rows.iter().map(|&r| ds.target[r] as u8).collect();
            class_weights(&labels)?
        }
        Task::Regression => Vec::new(),
    };
    let monitor = if val_rows.is_empty() { train_rows } else { val_rows };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f0d);
    let mut order = train_rows.to_vec();
    let mut adam = AdamState::new(&model.params);
    let mut best = (f64::INFINITY, 0usize, model.params.clone());
    let mut train_losses = Vec::new();
    let mut val_losses = Vec::new();
    let mut epochs_run = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let (loss, grads) = model.loss_and_grads(ds, chunk, &weights)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFinite {
                    epoch,
                    batch: b,
                    gate: model.gate(),
                });
            }
            adam_step(&mut model.params, &grads, &mut adam, config);
            epoch_loss += loss * chunk.len() as f64;
        }
        epochs_run = epoch + 1;
        train_losses.push(epoch_loss / order.len() as f64);
        let val = model.evaluate_loss(ds, monitor, &weights)?;
        if !val.is_finite() {
            return Err(TrainError::NonFinite {
                epoch,
                batch: usize::MAX,
                gate: model.gate(),
            });
        }
        val_losses.push(val);
        debug!("epoch {epoch}: train {:.5} val {val:.5} gate {:?}", train_losses[epoch], model.gate());
        if val < best.0 {
            best = (val, epoch, model.params.clone());
        } else if epoch - best.1 >= config.patience {
            break;
        }
    }
    model.params = best.2;
    let mut rows_seen: Vec<usize> = train_rows.iter().chain(val_rows).copied().collect();
    rows_seen.sort_unstable();
    rows_seen.dedup();
    Ok(TrainReport {
        epochs_run,
        best_epoch: best.1,
        best_val_loss: best.0,
        train_losses,
        val_losses,
        rows_seen,
    })
}

/// Hex SHA-256 of `text`.
pub fn fingerprint(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

const CHECKPOINT_HEADER: &str = "attn-impute checkpoint v1";

/// Plain-text parameter dump: header, fingerprint, then one `name shape`
/// line followed by one line of values per tensor.
pub fn export_checkpoint(params: &ParamSet, config_fingerprint: &str) -> String {
    let mut out = format!("{CHECKPOINT_HEADER}\nfingerprint {config_fingerprint}\n");
    for p in params.iter() {
        let shape: Vec<String> = p.value.shape().iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "param {} {}", p.name, shape.join("x"));
        let values: Vec<String> = p.value.data().iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", values.join(" "));
    }
    out
}

/// Parses a checkpoint into a parameter set and its fingerprint.
pub fn import_checkpoint(text: &str) -> Result<(ParamSet, String), TrainError> {
    let bad = |line: usize, msg: &str| TrainError::Checkpoint(format!("line {line}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l == CHECKPOINT_HEADER => {}
        _ => return Err(bad(1, "missing header")),
    }
    let fp = match lines.next() {
        Some((_, l)) if l.starts_with("fingerprint ") => l["fingerprint ".len()..].to_string(),
        _ => return Err(bad(2, "missing fingerprint")),
    };
    let mut params = ParamSet::new();
    while let Some((ln, header)) = lines.next() {
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "param" {
            return Err(bad(ln, "expected `param <name> <shape>`"));
        }
        let shape: Vec<usize> = parts[2]
            .split('x')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad(ln, "bad shape"))?;
        let (vln, values) = lines.next().ok_or_else(|| bad(ln + 1, "missing values"))?;
        let data: Vec<f64> = values
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad(vln, "bad value"))?;
        let tensor = Tensor::new(&shape, data).map_err(|e| bad(vln, &e.to_string()))?;
        params.add(parts[1], tensor);
    }
    Ok((params, fp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn balanced_and_skewed_weights() {
        let even: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        assert_eq!(class_weights(&even).unwrap(), vec![1.0, 1.0]);
        let skew: Vec<u8> = (0..100).map(|i| u8::from(i < 10)).collect();
        let w = class_weights(&skew).unwrap();
        assert!((w[0] - 0.5556).abs() < 1e-4 && (w[1] - 5.0).abs() < 1e-12);
        assert!(matches!(class_weights(&[1, 1, 1]), Err(TrainError::SingleClass(1))));
    }

    fn scalar_params(v: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::scalar(v));
        ps
    }

    #[test]
    fn adam_zero_gradient_is_fixed_point() {
        let mut ps = scalar_params(1.5);
        let mut st = AdamState::new(&ps);
        adam_step(&mut ps, &[vec![0.0]], &mut st, &TrainConfig::default());
        assert_eq!(ps.iter().next().unwrap().value.item(), 1.5);
    }

    #[test]
    fn adam_first_step_has_magnitude_lr() {
        let cfg = TrainConfig::default();
        for g in [0.3, -7.0] {
            let mut ps = scalar_params(0.0);
            let mut st = AdamState::new(&ps);
            adam_step(&mut ps, &[vec![g]], &mut st, &cfg);
            let delta = ps.iter().next().unwrap().value.item();
            let expected = -cfg.learning_rate * g / (g.abs() + cfg.epsilon);
            assert!((delta - expected).abs() < 1e-15, "{delta} vs {expected}");
        }
    }

    #[test]
    fn adam_converges_on_quadratic_bowl() {
        let target = [0.5, -0.25, 0.1];
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::zeros(&[3]));
        let cfg = TrainConfig {
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let mut st = AdamState::new(&ps);
        for _ in 0..500 {
            let w = ps.iter().next().unwrap().value.data().to_vec();
            let g: Vec<f64> = w.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            adam_step(&mut ps, &[g], &mut st, &cfg);
        }
        let w = ps.iter().next().unwrap().value.data().to_vec();
        for (a, b) in w.iter().zip(&target) {
            assert!((a - b).abs() < 1e-3, "{w:?}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn small_config(seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 3,
            hidden_layers: 2,
            hidden_width: 16,
            batch_size: 16,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn identical_seeds_identical_losses() {
        let ds = synthetic::linearly_separable(80, 2);
        let rows: Vec<usize> = (0..60).collect();
        let val: Vec<usize> = (60..80).collect();
        let run = || {
            let mut m = Model::build(Method::Film, 2, &FrontEndOptions::default(), &small_config(4), ds.task).unwrap();
            train(&mut m, &ds, &rows, &val, &small_config(4)).unwrap()
        };
        assert_eq!(run().train_losses, run().train_losses);
    }

    #[test]
    fn regression_path_trains() {
        let ds = synthetic::regression(64, 3, 1);
        let rows: Vec<usize> = (0..48).collect();
        let val: Vec<usize> = (48..64).collect();
        let cfg = small_config(1);
        let mut m = Model::build(Method::Zimc, 3, &FrontEndOptions::default(), &cfg, Task::Regression).unwrap();
        let report = train(&mut m, &ds, &rows, &val, &cfg).unwrap();
        assert!(report.best_val_loss.is_finite());
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = small_config(3);
        let m = Model::build(Method::Main, 3, &FrontEndOptions::default(), &cfg, Task::Classification).unwrap();
        let text = export_checkpoint(&m.params, "abc");
        let (back, fp) = import_checkpoint(&text).unwrap();
        assert_eq!(fp, "abc");
        assert_eq!(back, m.params);
        assert!(import_checkpoint("nope").is_err());
    }
}
