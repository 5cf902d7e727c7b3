//! Reference front-ends: zero impute with mask concat, sparsity normalization
//! and feature-wise linear modulation.
//!
//! Masks passed in use existence polarity (1 = observed). The ZIMC output
//! reports the complement (1 = missing).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Graph, Var};
use crate::nn::{Activation, Bound, Linear, ParamSet};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("values and mask lengths differ ({values} vs {mask})")]
    Length { values: usize, mask: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

fn check_lengths(x: &[f64], m: &[u8]) -> Result<(), BaselineError> {
    if x.len() != m.len() {
        return Err(BaselineError::Length {
            values: x.len(),
            mask: m.len(),
        });
    }
    Ok(())
}

/// `[x ⊙ m : 1 − m]`, length `2n`.
pub fn zimc(x: &[f64], m: &[u8]) -> Result<Vec<f64>, BaselineError> {
    check_lengths(x, m)?;
    let filled = x.iter().zip(m).map(|(&v, &b)| if b != 0 { v } else { 0.0 });
    let report = m.iter().map(|&b| if b != 0 { 0.0 } else { 1.0 });
    Ok(filled.chain(report).collect())
}

/// Per-instance scale factor for sparsity normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SnScaling {
    /// `n / ||m||₁`
    #[default]
    InverseMean,
    /// `(n + 1) / (||m||₁ + 1)`
    CountPlusOne,
}

impl SnScaling {
    /// `None` when the factor is undefined (nothing observed under `InverseMean`).
    pub fn factor(self, n: usize, observed: usize) -> Option<f64> {
        match self {
            SnScaling::InverseMean => (observed > 0).then(|| n as f64 / observed as f64),
            SnScaling::CountPlusOne => Some((n as f64 + 1.0) / (observed as f64 + 1.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnOutput {
    pub values: Vec<f64>,
    /// Set when the scale factor was undefined and the output zeroed.
    pub flagged: bool,
}

/// `(x ⊙ m) · factor(n, ||m||₁)`.
pub fn sparsity_normalize(x: &[f64], m: &[u8], scaling: SnScaling) -> Result<SnOutput, BaselineError> {
    check_lengths(x, m)?;
    let observed = m.iter().filter(|&&b| b != 0).count();
    match scaling.factor(x.len(), observed) {
        Some(f) => Ok(SnOutput {
            values: x.iter().zip(m).map(|(&v, &b)| if b != 0 { v * f } else { 0.0 }).collect(),
            flagged: false,
        }),
        None => Ok(SnOutput {
            values: vec![0.0; x.len()],
            flagged: true,
        }),
    }
}

/// Conditioning network producing a per-feature scale and shift from the
/// fused context `[x ⊙ m : m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilmLayer {
    pub n_features: usize,
    pub hidden: Linear,
    pub scale_head: Linear,
    pub shift_head: Linear,
}

/// Scale and shift produced for one batch.
#[derive(Debug, Clone, Copy)]
pub struct FilmTrace {
    pub scale: Var,
    pub shift: Var,
    pub output: Var,
}

impl FilmLayer {
    /// The heads start at scale 1 and shift 0, so the untrained layer is the
    /// identity on `x ⊙ m`.
    pub fn new(params: &mut ParamSet, name: &str, n_features: usize, rng: &mut impl Rng) -> Self {
        let ctx = 2 * n_features;
        let hidden = Linear::new(params, &format!("{name}.hidden"), ctx, ctx, rng);
        let scale_head = Linear::new(params, &format!("{name}.scale"), ctx, n_features, rng);
        let shift_head = Linear::new(params, &format!("{name}.shift"), ctx, n_features, rng);
        params.get_mut(scale_head.weight).data_mut().fill(0.0);
        params.get_mut(scale_head.bias).data_mut().fill(1.0);
        params.get_mut(shift_head.weight).data_mut().fill(0.0);
        params.get_mut(shift_head.bias).data_mut().fill(0.0);
        Self {
            n_features,
            hidden,
            scale_head,
            shift_head,
        }
    }

    /// `masked` and `mask` are `[batch, n]` with `masked = x ⊙ m`.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, masked: Var, mask: Var) -> Result<FilmTrace, TensorError> {
        let ctx = g.concat(&[masked, mask], 1)?;
        let h = self.hidden.forward(g, bound, ctx)?;
        let h = Activation::Relu.apply(g, h);
        let scale = self.scale_head.forward(g, bound, h)?;
        let shift = self.shift_head.forward(g, bound, h)?;
        let scaled = g.mul(scale, masked)?;
        let output = g.add(scaled, shift)?;
        Ok(FilmTrace { scale, shift, output })
    }
}

/// Single-instance FiLM evaluation.
pub fn film(layer: &FilmLayer, params: &ParamSet, x: &[f64], m: &[u8]) -> Result<Vec<f64>, BaselineError> {
    check_lengths(x, m)?;
    let n = x.len();
    if n != layer.n_features {
        return Err(TensorError::Shape {
            op: "film",
            left: vec![n],
            right: vec![layer.n_features],
        }
        .into());
    }
    let mut g = Graph::new();
    let bound = params.bind_frozen(&mut g);
    let masked: Vec<f64> = x.iter().zip(m).map(|(&v, &b)| if b != 0 { v } else { 0.0 }).collect();
    let masked = g.constant(Tensor::new(&[1, n], masked)?);
    let mask = g.constant(Tensor::new(&[1, n], m.iter().map(|&b| f64::from(b)).collect())?);
    let trace = layer.forward(&mut g, &bound, masked, mask)?;
    Ok(g.value(trace.output).data().to_vec())
}
