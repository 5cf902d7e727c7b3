//! Opaque multi-head attention imputation layer.
//!
//! Each feature row of the PEV-augmented matrix passes through its own small
//! transform network (`dq`, `dk`, `dv`) and then a shared projection, giving
//! per-feature queries, keys and values. Multi-head self-attention lets every
//! feature attend over all features of the same instance, and a single
//! trainable opacity gate `γ = sigmoid(gate_logit)` blends the attended result
//! with the query projection:
//!
//! ```text
//! x̂ = γ · mha(q, k, v) + (1 − γ) · q
//! ```
//!
//! The `N x emb` result is flattened row-major for the downstream model.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Graph, Var};
use crate::nn::{fan_in_uniform, Activation, Bound, Linear, ParamId, ParamSet};
use crate::pev::{self, PevError};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum MainLayerError {
    #[error("invalid attention config: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Pev(#[from] PevError),
}

/// Attention score function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// `q kᵀ / sqrt(d_head)`.
    #[default]
    ScaledDot,
    /// Luong "general": `q W kᵀ / sqrt(d_head)` with one `W` shared by all heads.
    General,
}

/// What the opacity gate blends the attended representation against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GateBlend {
    #[default]
    Query,
    /// A separate learned projection of the augmented input rows.
    RawProjection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MainLayerConfig {
    pub num_heads: usize,
    pub emb_dim: usize,
    pub key_dim: usize,
    /// Width of the single hidden layer of `dq`, `dk` and `dv`.
    pub transform_hidden: usize,
    pub score: ScoreKind,
    /// Query and value share `proj_n` when true.
    pub tie_value_projection: bool,
    pub blend: GateBlend,
}

impl Default for MainLayerConfig {
    fn default() -> Self {
        Self {
            num_heads: 4,
            emb_dim: 32,
            key_dim: 32,
            transform_hidden: 16,
            score: ScoreKind::ScaledDot,
            tie_value_projection: true,
            blend: GateBlend::Query,
        }
    }
}

impl MainLayerConfig {
    pub fn validate(&self) -> Result<(), MainLayerError> {
        let cfg = |m: String| Err(MainLayerError::Config(m));
        if self.num_heads == 0 || self.emb_dim == 0 || self.key_dim == 0 || self.transform_hidden == 0 {
            return cfg("all sizes must be positive".into());
        }
        if self.emb_dim % self.num_heads != 0 {
            return cfg(format!("emb_dim {} not divisible by num_heads {}", self.emb_dim, self.num_heads));
        }
        if self.key_dim % self.num_heads != 0 {
            return cfg(format!("key_dim {} not divisible by num_heads {}", self.key_dim, self.num_heads));
        }
        if self.score == ScoreKind::ScaledDot && self.key_dim != self.emb_dim {
            return cfg(format!(
                "scaled dot scores need key_dim == emb_dim (got {} and {}); use the general score",
                self.key_dim, self.emb_dim
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.emb_dim / self.num_heads
    }

    pub fn key_head_dim(&self) -> usize {
        self.key_dim / self.num_heads
    }
}

/// Parameter handles of one attention imputation layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MainLayer {
    pub n_features: usize,
    pub config: MainLayerConfig,
    pub dq: Linear,
    pub dk: Linear,
    pub dv: Linear,
    pub proj_n: Linear,
    pub proj_k: Linear,
    /// Separate value projection when untied.
    pub proj_v: Option<Linear>,
    /// `[d_head, d_key_head]` matrix for the general score.
    pub score_weight: Option<ParamId>,
    /// Projection of the raw augmented rows, for [`GateBlend::RawProjection`].
    pub raw_proj: Option<Linear>,
    pub gate_logit: ParamId,
}

/// Intermediate results of one batched forward pass.
#[derive(Debug, Clone, Copy)]
pub struct MainTrace {
    /// `[batch * n, emb]`
    pub query: Var,
    /// `[batch * n, key_dim]`
    pub key: Var,
    /// `[batch * n, emb]`
    pub value: Var,
    /// `[batch * heads, n, n]`, rows sum to one.
    pub attention: Var,
    /// `[batch * n, emb]`
    pub imputed: Var,
    /// `[1]`
    pub gate: Var,
    /// `[batch, n * emb]`
    pub output: Var,
}

impl MainLayer {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        n_features: usize,
        config: MainLayerConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, MainLayerError> {
        config.validate()?;
        if n_features == 0 {
            return Err(PevError::Empty.into());
        }
        let width = 2 + pev::bit_width(n_features);
        let h = config.transform_hidden;
        let dq = Linear::new(params, &format!("{name}.dq"), width, h, rng);
        let dk = Linear::new(params, &format!("{name}.dk"), width, h, rng);
        let dv = Linear::new(params, &format!("{name}.dv"), width, h, rng);
        let proj_n = Linear::new(params, &format!("{name}.proj_n"), h, config.emb_dim, rng);
        let proj_k = Linear::new(params, &format!("{name}.proj_k"), h, config.key_dim, rng);
        let proj_v = (!config.tie_value_projection)
            .then(|| Linear::new(params, &format!("{name}.proj_v"), h, config.emb_dim, rng));
        let score_weight = (config.score == ScoreKind::General).then(|| {
            let (dh, dkh) = (config.head_dim(), config.key_head_dim());
            params.add(format!("{name}.score_weight"), fan_in_uniform(rng, dh, &[dh, dkh]))
        });
        let raw_proj = (config.blend == GateBlend::RawProjection)
            .then(|| Linear::new(params, &format!("{name}.raw_proj"), width, config.emb_dim, rng));
        // sigmoid(0) = 0.5
        let gate_logit = params.add(format!("{name}.gate_logit"), Tensor::scalar(0.0));
        Ok(Self {
            n_features,
            config,
            dq,
            dk,
            dv,
            proj_n,
            proj_k,
            proj_v,
            score_weight,
            raw_proj,
            gate_logit,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.n_features * self.config.emb_dim
    }

    pub fn augmented_width(&self) -> usize {
        2 + pev::bit_width(self.n_features)
    }

    /// Current gate value `sigmoid(gate_logit)`.
    pub fn gate_value(&self, params: &ParamSet) -> f64 {
        crate::autodiff::sigmoid(params.get(self.gate_logit).item())
    }

    /// Per-row transform networks followed by the shared projections.
    pub fn project(&self, g: &mut Graph, bound: &Bound, augmented: Var) -> Result<(Var, Var, Var), MainLayerError> {
        let shape = g.shape(augmented).to_vec();
        if shape.len() != 2 || shape[1] != self.augmented_width() {
            return Err(TensorError::Shape {
                op: "project",
                left: shape,
                right: vec![self.augmented_width()],
            }
            .into());
        }
        let transform = |g: &mut Graph, layer: &Linear| -> Result<Var, TensorError> {
            let h = layer.forward(g, bound, augmented)?;
            Ok(Activation::Relu.apply(g, h))
        };
        let hq = transform(g, &self.dq)?;
        let hk = transform(g, &self.dk)?;
        let hv = transform(g, &self.dv)?;
        let query = self.proj_n.forward(g, bound, hq)?;
        let key = self.proj_k.forward(g, bound, hk)?;
        let value = self.proj_v.as_ref().unwrap_or(&self.proj_n).forward(g, bound, hv)?;
        Ok((query, key, value))
    }

    /// Returns `(attention weights [b*h, n, n], output [b*n, emb])`.
    pub fn attend(
        &self,
        g: &mut Graph,
        bound: &Bound,
        query: Var,
        key: Var,
        value: Var,
        batch: usize,
    ) -> Result<(Var, Var), MainLayerError> {
        let score_weight = self.score_weight.map(|id| bound.var(id));
        multi_head_attention(g, query, key, value, batch, self.n_features, &self.config, score_weight)
    }

    /// Full batched pass from augmented rows `[batch * n, 2 + bw]`.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, augmented: Var, batch: usize) -> Result<MainTrace, MainLayerError> {
        let (query, key, value) = self.project(g, bound, augmented)?;
        let (attention, imputed) = self.attend(g, bound, query, key, value, batch)?;
        let base = match &self.raw_proj {
            Some(p) => p.forward(g, bound, augmented)?,
            None => query,
        };
        let (gate, blended) = opacity_gate(g, imputed, base, bound.var(self.gate_logit))?;
        let output = g.reshape(blended, &[batch, self.output_dim()])?;
        Ok(MainTrace {
            query,
            key,
            value,
            attention,
            imputed,
            gate,
            output,
        })
    }

    /// Convenience batched pass from dense values and existence masks.
    pub fn forward_masked(
        &self,
        g: &mut Graph,
        bound: &Bound,
        values: &[Vec<f64>],
        masks: &[Vec<u8>],
    ) -> Result<MainTrace, MainLayerError> {
        let aug = pev::batch_augmented(values, masks)?;
        let aug = g.constant(aug);
        self.forward(g, bound, aug, values.len())
    }
}

/// Scaled multi-head attention over per-feature rows.
///
/// `query`/`value` are `[batch * n, emb]`, `key` is `[batch * n, key_dim]`.
#[allow(clippy::too_many_arguments)]
pub fn multi_head_attention(
    g: &mut Graph,
    query: Var,
    key: Var,
    value: Var,
    batch: usize,
    n: usize,
    config: &MainLayerConfig,
    score_weight: Option<Var>,
) -> Result<(Var, Var), MainLayerError> {
    config.validate_heads()?;
    let h = config.num_heads;
    let (dh, dkh) = (config.head_dim(), config.key_head_dim());
    let split = |g: &mut Graph, x: Var, d: usize, key_layout: bool| -> Result<Var, TensorError> {
        let x = g.reshape(x, &[batch, n, h, d])?;
        if key_layout {
            let x = g.permute(x, &[0, 2, 3, 1])?;
            g.reshape(x, &[batch * h, d, n])
        } else {
            let x = g.permute(x, &[0, 2, 1, 3])?;
            g.reshape(x, &[batch * h, n, d])
        }
    };
    let mut q = split(g, query, dh, false)?;
    let k_t = split(g, key, dkh, true)?;
    let v = split(g, value, dh, false)?;
    match (config.score, score_weight) {
        (ScoreKind::General, Some(w)) => {
            let flat = g.reshape(q, &[batch * h * n, dh])?;
            let mixed = g.matmul(flat, w)?;
            q = g.reshape(mixed, &[batch * h, n, dkh])?;
        }
        (ScoreKind::General, None) => {
            return Err(MainLayerError::Config("general score needs a score weight".into()))
        }
        (ScoreKind::ScaledDot, _) => {}
    }
    let scores = g.bmm(q, k_t)?;
    let scores = g.scale(scores, 1.0 / (dkh as f64).sqrt());
    let weights = g.softmax(scores, 2)?;
    let out = g.bmm(weights, v)?;
    let out = g.reshape(out, &[batch, h, n, dh])?;
    let out = g.permute(out, &[0, 2, 1, 3])?;
    let out = g.reshape(out, &[batch * n, h * dh])?;
    Ok((weights, out))
}

impl MainLayerConfig {
    fn validate_heads(&self) -> Result<(), MainLayerError> {
        if self.num_heads == 0 || self.emb_dim % self.num_heads != 0 || self.key_dim % self.num_heads != 0 {
            return Err(MainLayerError::Config(format!(
                "emb_dim {} and key_dim {} must both be divisible by num_heads {}",
                self.emb_dim, self.key_dim, self.num_heads
            )));
        }
        if self.score == ScoreKind::ScaledDot && self.key_dim != self.emb_dim {
            return Err(MainLayerError::Config("scaled dot scores need key_dim == emb_dim".into()));
        }
        Ok(())
    }
}

/// `γ · imputed + (1 − γ) · base` with `γ = sigmoid(gate_logit)`.
/// Returns `(γ, blended)`.
pub fn opacity_gate(g: &mut Graph, imputed: Var, base: Var, gate_logit: Var) -> Result<(Var, Var), TensorError> {
    if g.shape(imputed) != g.shape(base) {
        return Err(TensorError::Shape {
            op: "opacity_gate",
            left: g.shape(imputed).to_vec(),
            right: g.shape(base).to_vec(),
        });
    }
    let gamma = g.sigmoid(gate_logit);
    let one = g.constant(Tensor::scalar(1.0));
    let rest = g.sub(one, gamma)?;
    let a = g.mul(gamma, imputed)?;
    let b = g.mul(rest, base)?;
    Ok((gamma, g.add(a, b)?))
}

/// Forward pass of a single instance; `None` marks a missing feature.
/// Returns the flattened `n * emb` representation.
pub fn main_forward(layer: &MainLayer, params: &ParamSet, x: &[Option<f64>]) -> Result<Vec<f64>, MainLayerError> {
    if x.len() != layer.n_features {
        return Err(TensorError::Shape {
            op: "main_forward",
            left: vec![x.len()],
            right: vec![layer.n_features],
        }
        .into());
    }
    let (pev, _) = pev::pev_mask_generator(x)?;
    let mut g = Graph::new();
    let bound = params.bind_frozen(&mut g);
    let aug = g.constant(pev.to_tensor());
    let trace = layer.forward(&mut g, &bound, aug, 1)?;
    Ok(g.value(trace.output).data().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer(n: usize, config: MainLayerConfig) -> (MainLayer, ParamSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ps = ParamSet::new();
        let l = MainLayer::new(&mut ps, "main", n, config, &mut rng).unwrap();
        (l, ps)
    }

    #[test]
    fn config_validation() {
        let mut c = MainLayerConfig::default();
        assert!(c.validate().is_ok());
        c.emb_dim = 30;
        assert!(matches!(c.validate(), Err(MainLayerError::Config(_))));
        let c = MainLayerConfig {
            key_dim: 16,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = MainLayerConfig {
            key_dim: 16,
            score: ScoreKind::General,
            ..Default::default()
        };
        assert!(c.validate().is_ok());
    }

    #[test]
    fn gate_starts_at_half() {
        let (l, ps) = layer(4, MainLayerConfig::default());
        assert_eq!(l.gate_value(&ps), 0.5);
    }

    #[test]
    fn zero_params_give_zero_projections() {
        let (l, mut ps) = layer(4, MainLayerConfig::default());
        ps.iter_mut().for_each(|p| p.value.data_mut().fill(0.0));
        let mut g = Graph::new();
        let bound = ps.bind(&mut g);
        let trace = l
            .forward_masked(&mut g, &bound, &[vec![0.3, 0.0, 0.5, 0.1]], &[vec![1, 0, 1, 1]])
            .unwrap();
        assert_eq!(g.shape(trace.query), &[4, 32]);
        assert_eq!(g.shape(trace.key), &[4, 32]);
        assert_eq!(g.shape(trace.value), &[4, 32]);
        for v in [trace.query, trace.key, trace.value] {
            assert!(g.value(v).data().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn main_forward_length_and_finiteness() {
        let cfg = MainLayerConfig {
            emb_dim: 8,
            key_dim: 8,
            ..Default::default()
        };
        let (l, ps) = layer(4, cfg);
        let out = main_forward(&l, &ps, &[Some(0.1), None, Some(0.3), Some(0.0)]).unwrap();
        assert_eq!(out.len(), 32);
        let all_missing = main_forward(&l, &ps, &[None; 4]).unwrap();
        assert!(all_missing.iter().all(|v| v.is_finite()));
        assert!(main_forward(&l, &ps, &[None; 3]).is_err());
    }

    #[test]
    fn zero_query_gives_uniform_attention() {
        let cfg = MainLayerConfig {
            num_heads: 2,
            emb_dim: 4,
            key_dim: 4,
            ..Default::default()
        };
        let n = 3;
        let mut g = Graph::new();
        let q = g.constant(Tensor::zeros(&[n, 4]));
        let k = g.constant(Tensor::new(&[n, 4], (0..12).map(|i| i as f64 * 0.3).collect()).unwrap());
        let vdata: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let v = g.constant(Tensor::new(&[n, 4], vdata.clone()).unwrap());
        let (w, out) = multi_head_attention(&mut g, q, k, v, 1, n, &cfg, None).unwrap();
        assert!(g.value(w).data().iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        let out = g.value(out);
        for c in 0..4 {
            let mean = (0..n).map(|r| vdata[r * 4 + c]).sum::<f64>() / n as f64;
            for r in 0..n {
                assert!((out.at(&[r, c]) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn saturated_orthonormal_queries_retrieve_own_value() {
        let cfg = MainLayerConfig {
            num_heads: 1,
            emb_dim: 3,
            key_dim: 3,
            ..Default::default()
        };
        let mut g = Graph::new();
        let eye: Vec<f64> = (0..9).map(|i| if i % 4 == 0 { 100.0 } else { 0.0 }).collect();
        let q = g.constant(Tensor::new(&[3, 3], eye.clone()).unwrap());
        let k = g.constant(Tensor::new(&[3, 3], eye).unwrap());
        let vdata = vec![1.0, 2.0, 3.0, -1.0, 0.5, 4.0, 7.0, 8.0, -9.0];
        let v = g.constant(Tensor::new(&[3, 3], vdata.clone()).unwrap());
        let (w, out) = multi_head_attention(&mut g, q, k, v, 1, 3, &cfg, None).unwrap();
        for r in 0..3 {
            assert!((g.value(w).at(&[0, r, r]) - 1.0).abs() < 1e-12);
        }
        for (a, b) in g.value(out).data().iter().zip(&vdata) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn gate_limits() {
        let mut g = Graph::new();
        let imp = g.constant(Tensor::new(&[2], vec![1.0, 3.0]).unwrap());
        let q = g.constant(Tensor::new(&[2], vec![-1.0, 5.0]).unwrap());
        let zero = g.constant(Tensor::scalar(0.0));
        let (_, half) = opacity_gate(&mut g, imp, q, zero).unwrap();
        assert_eq!(g.value(half).data(), &[0.0, 4.0]);
        let big = g.constant(Tensor::scalar(60.0));
        let (_, near) = opacity_gate(&mut g, imp, q, big).unwrap();
        for (a, b) in g.value(near).data().iter().zip([1.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let (_, same) = opacity_gate(&mut g, q, q, big).unwrap();
        assert_eq!(g.value(same).data(), g.value(q).data());
        let wrong = g.constant(Tensor::zeros(&[3]));
        assert!(opacity_gate(&mut g, imp, wrong, zero).is_err());
    }

    #[test]
    fn general_score_and_untied_variants_run() {
        let cfg = MainLayerConfig {
            key_dim: 16,
            score: ScoreKind::General,
            tie_value_projection: false,
            blend: GateBlend::RawProjection,
            ..Default::default()
        };
        let (l, ps) = layer(5, cfg);
        assert!(l.proj_v.is_some() && l.raw_proj.is_some() && l.score_weight.is_some());
        let out = main_forward(&l, &ps, &[Some(0.2), None, Some(-0.3), Some(0.9), None]).unwrap();
        assert_eq!(out.len(), 5 * 32);
        assert!(out.iter().all(|v| v.is_finite()));
    }
}
