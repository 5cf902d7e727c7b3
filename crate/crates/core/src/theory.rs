//! Monte-Carlo checks of lower bounds on the expected activations of random
//! feed-forward networks fed zero-imputed inputs `x ⊙ m`.
//!
//! Each sample draws fresh weights, biases, inputs and masks. Bounds are
//! tested with a slack of [`SLACK_STDERR`] standard errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{sigmoid, softplus};
use crate::experiment::mix_seed;
use crate::missingness::calibrate_intercept;

pub const SLACK_STDERR: f64 = 3.0;
/// Samples per seed-partitioned sub-run.
const CHUNK: usize = 1000;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid theory spec: {0}")]
    Invalid(String),
    #[error("length mismatch: {0} values vs {1} covariances")]
    Length(usize, usize),
}

impl TheoryError {
    pub fn is_config(&self) -> bool {
        !matches!(self, TheoryError::Length(..))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    Relu,
    Softplus,
}

impl Nonlinearity {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Relu => x.max(0.0),
            Nonlinearity::Softplus => softplus(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Relu => "relu",
            Nonlinearity::Softplus => "softplus",
        }
    }
}

/// Gaussian weight and bias distribution of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDist {
    pub weight_mean: f64,
    pub weight_std: f64,
    pub bias_mean: f64,
    pub bias_std: f64,
}

/// Random network plus the input distribution: every feature is
/// `x_mean + x_std · (√ρ z + √(1−ρ) ε)` with one shared factor `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFfnSpec {
    /// `n₀, n₁, …, n_N`.
    pub widths: Vec<usize>,
    pub layers: Vec<LayerDist>,
    pub activation: Nonlinearity,
    pub x_mean: f64,
    pub x_std: f64,
    #[serde(default)]
    pub x_corr: f64,
}

impl RandomFfnSpec {
    pub fn validate(&self) -> Result<(), TheoryError> {
        let bad = |m: String| Err(TheoryError::Invalid(m));
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return bad("widths need an input and at least one layer, all positive".into());
        }
        if self.layers.len() != self.widths.len() - 1 {
            return bad(format!("{} layer distributions for {} layers", self.layers.len(), self.widths.len() - 1));
        }
        if self.layers.iter().any(|l| l.weight_std < 0.0 || l.bias_std < 0.0) || self.x_std <= 0.0 {
            return bad("standard deviations must be non-negative (x_std positive)".into());
        }
        if !(0.0..=1.0).contains(&self.x_corr) {
            return bad(format!("x_corr {} outside [0, 1]", self.x_corr));
        }
        Ok(())
    }

    pub fn n0(&self) -> usize {
        self.widths[0]
    }

    /// Composition of `f_i(z) = σ(n_{i−1} μ_w^i z + μ_b^i)`, one value per layer.
    pub fn composed_bound(&self, z0: f64) -> Vec<f64> {
        let mut z = z0;
        self.layers
            .iter()
            .zip(&self.widths)
            .map(|(l, &n_in)| {
                z = self.activation.apply(n_in as f64 * l.weight_mean * z + l.bias_mean);
                z
            })
            .collect()
    }

    /// Layers after the first need `μ_w ≥ 0` for the composed bound to hold.
    pub fn composable(&self) -> bool {
        self.layers.iter().skip(1).all(|l| l.weight_mean >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum MaskGen {
    /// Nothing missing.
    Complete,
    /// Each cell missing independently with probability `rate`.
    Mcar { rate: f64 },
    /// Feature `k` observed with probability `sigmoid(a + slope · z_{k+1})`,
    /// where `z_{k+1}` is the standardized value of the next feature (wrapping)
    /// and `a` is calibrated to the rate.
    Mar { rate: f64, slope: f64 },
}

impl MaskGen {
    pub fn rate(self) -> f64 {
        match self {
            MaskGen::Complete => 0.0,
            MaskGen::Mcar { rate } | MaskGen::Mar { rate, .. } => rate,
        }
    }

    fn label(self) -> String {
        match self {
            MaskGen::Complete => "none".into(),
            MaskGen::Mcar { rate } => format!("mcar {rate}"),
            MaskGen::Mar { rate, slope } => format!("mar {rate} s={slope:.2}"),
        }
    }
}

fn mar_intercept(rate: f64, slope: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d61_72);
    let z: Vec<f64> = (0..20_000).map(|_| rng.sample(StandardNormal)).collect();
    calibrate_intercept(&z, slope, 1.0 - rate)
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub samples: usize,
    /// Per unit of layer 1.
    pub layer1: Vec<MeanEstimate>,
    /// Per unit of the last layer.
    pub last: Vec<MeanEstimate>,
    /// Per-feature `cov(x_k, m_k)` with `m` the existence indicator.
    pub cov: Vec<MeanEstimate>,
    /// Per-feature `E[x_k m_k]`.
    pub xm_mean: Vec<f64>,
    pub m_mean: f64,
    pub x_mean: f64,
}

struct Chunk {
    h1: Vec<f64>,
    last: Vec<f64>,
    x: Vec<f64>,
    m: Vec<f64>,
}

fn simulate_chunk(spec: &RandomFfnSpec, mask: MaskGen, intercept: f64, n: usize, seed: u64, shift: Option<&[f64]>) -> Chunk {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n0 = spec.n0();
    let n1 = spec.widths[1];
    let n_last = *spec.widths.last().expect("validated");
    let (a, b) = (spec.x_corr.sqrt(), (1.0 - spec.x_corr).sqrt());
    let dists: Vec<(Normal<f64>, Normal<f64>)> = spec
        .layers
        .iter()
        .map(|l| {
            (
                Normal::new(l.weight_mean, l.weight_std).expect("valid std"),
                Normal::new(l.bias_mean, l.bias_std).expect("valid std"),
            )
        })
        .collect();
    let mut out = Chunk {
        h1: Vec::with_capacity(n * n1),
        last: Vec::with_capacity(n * n_last),
        x: Vec::with_capacity(n * n0),
        m: Vec::with_capacity(n * n0),
    };
    let mut z = vec![0.0; n0];
    let mut input = vec![0.0; n0];
    for _ in 0..n {
        let shared: f64 = rng.sample(StandardNormal);
        for zk in z.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *zk = a * shared + b * e;
        }
        for k in 0..n0 {
            let x = spec.x_mean + spec.x_std * z[k];
            let observed = match mask {
                MaskGen::Complete => true,
                MaskGen::Mcar { rate } => rng.gen::<f64>() >= rate,
                MaskGen::Mar { slope, .. } => rng.gen::<f64>() < sigmoid(intercept + slope * z[(k + 1) % n0]),
            };
            let m = f64::from(u8::from(observed));
            out.x.push(x);
            out.m.push(m);
            input[k] = x * m - shift.map_or(0.0, |s| s[k]);
        }
        let mut h = input.clone();
        for (li, (wd, bd)) in dists.iter().enumerate() {
            let n_out = spec.widths[li + 1];
            let next: Vec<f64> = (0..n_out)
                .map(|_| {
                    let pre: f64 = h.iter().map(|&v| wd.sample(&mut rng) * v).sum::<f64>() + bd.sample(&mut rng);
                    spec.activation.apply(pre)
                })
                .collect();
            if li == 0 {
                out.h1.extend_from_slice(&next);
            }
            h = next;
        }
        out.last.extend_from_slice(&h);
    }
    out
}

fn column_means(data: &[f64], width: usize, n: usize) -> Vec<MeanEstimate> {
    (0..width)
        .map(|j| {
            let col = data.iter().skip(j).step_by(width);
            let mean = col.clone().sum::<f64>() / n as f64;
            let var = col.map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            MeanEstimate {
                mean,
                stderr: (var / n as f64).sqrt(),
            }
        })
        .collect()
}

/// Monte-Carlo estimate over `samples` draws; `shift`, when given, is
/// subtracted from `x ⊙ m` before the first layer.
pub fn estimate(spec: &RandomFfnSpec, mask: MaskGen, samples: usize, seed: u64, shift: Option<&[f64]>) -> Estimate {
    assert!(samples >= 2, "need at least two samples");
    let intercept = match mask {
        MaskGen::Mar { rate, slope } => mar_intercept(rate, slope),
        _ => 0.0,
    };
    let chunks: Vec<usize> = (0..samples.div_ceil(CHUNK)).collect();
    let parts: Vec<Chunk> = chunks
        .par_iter()
        .map(|&c| {
            let n = CHUNK.min(samples - c * CHUNK);
            simulate_chunk(spec, mask, intercept, n, mix_seed(&[seed, c as u64]), shift)
        })
        .collect();
    let mut all = Chunk {
        h1: Vec::new(),
        last: Vec::new(),
        x: Vec::new(),
        m: Vec::new(),
    };
    for p in parts {
        all.h1.extend(p.h1);
        all.last.extend(p.last);
        all.x.extend(p.x);
        all.m.extend(p.m);
    }
    let n0 = spec.n0();
    let nf = samples as f64;
    let mut cov = Vec::with_capacity(n0);
    let mut xm_mean = Vec::with_capacity(n0);
    for k in 0..n0 {
        let xs: Vec<f64> = all.x.iter().skip(k).step_by(n0).copied().collect();
        let ms: Vec<f64> = all.m.iter().skip(k).step_by(n0).copied().collect();
        let mx = xs.iter().sum::<f64>() / nf;
        let mm = ms.iter().sum::<f64>() / nf;
        let prods: Vec<f64> = xs.iter().zip(&ms).map(|(x, m)| (x - mx) * (m - mm)).collect();
        let c = prods.iter().sum::<f64>() / (nf - 1.0);
        let var = prods.iter().map(|p| (p - c).powi(2)).sum::<f64>() / (nf - 1.0);
        cov.push(MeanEstimate {
            mean: c,
            stderr: (var / nf).sqrt(),
        });
        xm_mean.push(xs.iter().zip(&ms).map(|(x, m)| x * m).sum::<f64>() / nf);
    }
    Estimate {
        samples,
        layer1: column_means(&all.h1, spec.widths[1], samples),
        last: column_means(&all.last, *spec.widths.last().expect("validated"), samples),
        cov,
        xm_mean,
        m_mean: all.m.iter().sum::<f64>() / all.m.len() as f64,
        x_mean: all.x.iter().sum::<f64>() / all.x.len() as f64,
    }
}

/// Per-unit mean and standard error of `σ(W x⊙m + b)`.
pub fn estimate_layer1_expectation(spec: &RandomFfnSpec, mask: MaskGen, samples: usize, seed: u64) -> Vec<MeanEstimate> {
    estimate(spec, mask, samples, seed, None).layer1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    Theorem1,
    Theorem2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub bound: Bound,
    pub activation: Nonlinearity,
    pub mechanism: String,
    pub samples: usize,
    pub slack_stderr: f64,
    pub layer1: Vec<MeanEstimate>,
    /// Right-hand side in the scalar-mean form.
    pub rhs: f64,
    /// `T₁ = σ(n₀ μ_w cov)`; zero for the first bound.
    pub t1: f64,
    /// Mean of the per-feature covariances.
    pub cov_mean: f64,
    pub cov: Vec<MeanEstimate>,
    /// Features whose covariance is more than the slack from zero.
    pub cov_nonzero: usize,
    /// `σ(μ_w Σ_k E[x_k m_k] + μ_b)`, the Jensen bound evaluated per unit.
    pub rhs_exact: f64,
    pub verdicts: Vec<bool>,
    pub verdicts_exact: Vec<bool>,
    /// Composed last-layer bound with its per-unit estimates.
    pub last_rhs: Option<f64>,
    pub last: Vec<MeanEstimate>,
    pub last_verdicts: Vec<bool>,
}

impl BoundReport {
    pub fn pass(&self) -> bool {
        self.verdicts.iter().chain(&self.last_verdicts).all(|&v| v)
    }

    pub fn pass_exact(&self) -> bool {
        self.verdicts_exact.iter().all(|&v| v)
    }

    pub fn min_layer1(&self) -> MeanEstimate {
        self.layer1
            .iter()
            .copied()
            .min_by(|a, b| a.mean.total_cmp(&b.mean))
            .unwrap_or_default()
    }
}

fn above(est: &[MeanEstimate], rhs: f64) -> Vec<bool> {
    est.iter().map(|e| e.mean >= rhs - SLACK_STDERR * e.stderr).collect()
}

fn report(spec: &RandomFfnSpec, mask: MaskGen, bound: Bound, est: Estimate) -> BoundReport {
    let l1 = spec.layers[0];
    let n0 = spec.n0() as f64;
    let sigma = spec.activation;
    let cov_mean = est.cov.iter().map(|c| c.mean).sum::<f64>() / est.cov.len() as f64;
    let base = sigma.apply(n0 * l1.weight_mean * est.m_mean * spec.x_mean + l1.bias_mean);
    let t1 = match bound {
        Bound::Theorem1 => 0.0,
        Bound::Theorem2 => sigma.apply(n0 * l1.weight_mean * cov_mean),
    };
    let rhs = base + t1;
    let rhs_exact = sigma.apply(l1.weight_mean * est.xm_mean.iter().sum::<f64>() + l1.bias_mean);
    let (last_rhs, last_verdicts) = if bound == Bound::Theorem1 && spec.layers.len() > 1 {
        let chain = spec.composed_bound(est.m_mean * spec.x_mean);
        let r = *chain.last().expect("non-empty");
        (Some(r), above(&est.last, r))
    } else {
        (None, Vec::new())
    };
    BoundReport {
        bound,
        activation: sigma,
        mechanism: mask.label(),
        samples: est.samples,
        slack_stderr: SLACK_STDERR,
        verdicts: above(&est.layer1, rhs),
        verdicts_exact: above(&est.layer1, rhs_exact),
        rhs,
        t1,
        cov_mean,
        cov_nonzero: est
            .cov
            .iter()
            .filter(|c| c.mean.abs() >= SLACK_STDERR * c.stderr)
            .count(),
        cov: est.cov,
        rhs_exact,
        layer1: est.layer1,
        last_rhs,
        last: est.last,
        last_verdicts,
    }
}

/// MCAR bound at layer 1 and, through the composed chain, at the last layer.
pub fn check_theorem1(spec: &RandomFfnSpec, mcar_rate: f64, samples: usize, seed: u64) -> BoundReport {
    let mask = MaskGen::Mcar { rate: mcar_rate };
    report(spec, mask, Bound::Theorem1, estimate(spec, mask, samples, seed, None))
}

/// Layer-1 bound with the covariance term, under any mask generator.
pub fn check_theorem2(spec: &RandomFfnSpec, mask: MaskGen, samples: usize, seed: u64) -> BoundReport {
    report(spec, mask, Bound::Theorem2, estimate(spec, mask, samples, seed, None))
}

/// `x ⊙ m − cov`, feature by feature.
pub fn covariance_debias(xm: &[f64], cov: &[f64]) -> Result<Vec<f64>, TheoryError> {
    if xm.len() != cov.len() {
        return Err(TheoryError::Length(xm.len(), cov.len()));
    }
    Ok(xm.iter().zip(cov).map(|(x, c)| x - c).collect())
}

/// Ranges for randomly drawn specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub input_width: (usize, usize),
    pub hidden_width: (usize, usize),
    pub depth: (usize, usize),
    pub weight_mean: (f64, f64),
    pub weight_std: (f64, f64),
    pub bias_mean: (f64, f64),
    pub bias_std: (f64, f64),
    pub x_mean: (f64, f64),
    pub x_std: (f64, f64),
    pub x_corr: (f64, f64),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            input_width: (4, 12),
            hidden_width: (4, 12),
            depth: (1, 3),
            weight_mean: (-0.5, 0.5),
            weight_std: (0.05, 0.5),
            bias_mean: (-0.5, 0.5),
            bias_std: (0.0, 0.3),
            x_mean: (-1.0, 1.0),
            x_std: (0.2, 1.0),
            x_corr: (0.3, 0.8),
        }
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draws a spec; layers after the first get non-negative mean weights.
pub fn random_spec(rng: &mut impl Rng, cfg: &GeneratorConfig, activation: Nonlinearity) -> RandomFfnSpec {
    let depth = rng.gen_range(cfg.depth.0..=cfg.depth.1.max(cfg.depth.0));
    let mut widths = vec![rng.gen_range(cfg.input_width.0..=cfg.input_width.1.max(cfg.input_width.0))];
    for _ in 0..depth {
        widths.push(rng.gen_range(cfg.hidden_width.0..=cfg.hidden_width.1.max(cfg.hidden_width.0)));
    }
    let layers = (0..depth)
        .map(|i| {
            let mut wm = uniform(rng, cfg.weight_mean);
            if i > 0 {
                wm = wm.abs();
            }
            LayerDist {
                weight_mean: wm,
                weight_std: uniform(rng, cfg.weight_std),
                bias_mean: uniform(rng, cfg.bias_mean),
                bias_std: uniform(rng, cfg.bias_std),
            }
        })
        .collect();
    RandomFfnSpec {
        widths,
        layers,
        activation,
        x_mean: uniform(rng, cfg.x_mean),
        x_std: uniform(rng, cfg.x_std),
        x_corr: uniform(rng, cfg.x_corr),
    }
}

fn default_samples() -> usize {
    10_000
}
fn default_count() -> usize {
    20
}
fn default_activations() -> Vec<Nonlinearity> {
    vec![Nonlinearity::Relu, Nonlinearity::Softplus]
}
fn default_rates() -> Vec<f64> {
    vec![0.2, 0.5, 0.8]
}
fn default_mar_rate() -> f64 {
    0.4
}
fn default_mar_slope() -> (f64, f64) {
    (1.0, 3.0)
}

/// Suite description read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_count")]
    pub random_specs: usize,
    #[serde(default = "default_activations")]
    pub activations: Vec<Nonlinearity>,
    #[serde(default = "default_rates")]
    pub mcar_rates: Vec<f64>,
    #[serde(default = "default_mar_rate")]
    pub mar_rate: f64,
    /// Range of the MAR logistic slope; positive slopes give `cov(x, m) > 0`.
    #[serde(default = "default_mar_slope")]
    pub mar_slope: (f64, f64),
    #[serde(default)]
    pub generator: GeneratorConfig,
    /// Extra hand-written networks checked in addition to the random ones.
    #[serde(default)]
    pub networks: Vec<RandomFfnSpec>,
}

impl Default for TheorySpec {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

pub fn default_spec_path() -> PathBuf {
    crate::dataset::data_root().join("theory").join("default.toml")
}

impl TheorySpec {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, TheoryError> {
        let spec: Self = toml::from_str(text).map_err(|e| TheoryError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, TheoryError> {
        let text = fs::read_to_string(path).map_err(|source| TheoryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        if self.samples < 2 {
            return Err(TheoryError::Invalid("samples must be at least 2".into()));
        }
        if self.mcar_rates.iter().chain([&self.mar_rate]).any(|r| !(0.0..1.0).contains(r)) {
            return Err(TheoryError::Invalid("rates must lie in [0, 1)".into()));
        }
        for n in &self.networks {
            n.validate()?;
        }
        Ok(())
    }

    /// The random specs followed by the hand-written ones, for one activation.
    /// Random architectures and distributions are shared across activations.
    pub fn specs(&self, activation: Nonlinearity) -> Vec<RandomFfnSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out: Vec<RandomFfnSpec> = (0..self.random_specs)
            .map(|_| random_spec(&mut rng, &self.generator, activation))
            .collect();
        out.extend(self.networks.iter().cloned().map(|mut n| {
            n.activation = activation;
            n
        }));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub spec_index: usize,
    pub widths: Vec<usize>,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub samples: usize,
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    /// First-bound and second-bound rows in their printed form, plus the MCAR
    /// covariance check.
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.report.pass()) && self.mcar_cov_zero()
    }

    /// Covariance estimates of the second-bound MCAR rows are within the slack of zero.
    pub fn mcar_cov_zero(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| r.report.bound == Bound::Theorem2 && r.report.mechanism.starts_with("mcar"))
            .all(|r| r.report.cov_nonzero == 0)
    }

    pub fn count(&self, bound: Bound, activation: Nonlinearity, exact: bool) -> (usize, usize) {
        let rows: Vec<&SuiteRow> = self
            .rows
            .iter()
            .filter(|r| r.report.bound == bound && r.report.activation == activation)
            .collect();
        let passed = rows
            .iter()
            .filter(|r| if exact { r.report.pass_exact() } else { r.report.pass() })
            .count();
        (passed, rows.len())
    }

    /// Plain-text table, one row per check.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "samples {} per check, slack {SLACK_STDERR} stderr",
            self.samples
        );
        let _ = writeln!(
            out,
            "{:>4}  {:<14}  {:<8}  {:<8}  {:<14}  {:>18}  {:>9}  {:>9}  {:>9}  {:>6}  {:>6}  {:>6}",
            "spec", "widths", "bound", "sigma", "mask", "min E[h1]", "rhs", "T1", "jensen", "cov!=0", "verdct", "exact"
        );
        for r in &self.rows {
            let b = &r.report;
            let min = b.min_layer1();
            let widths: Vec<String> = r.widths.iter().map(ToString::to_string).collect();
            let verdict = |p: bool| if p { "PASS" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{:>4}  {:<14}  {:<8}  {:<8}  {:<14}  {:>9.4} ± {:<6.4}  {:>9.4}  {:>9.4}  {:>9.4}  {:>6}  {:>6}  {:>6}",
                r.spec_index,
                widths.join("-"),
                match b.bound {
                    Bound::Theorem1 => "thm1",
                    Bound::Theorem2 => "thm2",
                },
                b.activation.name(),
                b.mechanism,
                min.mean,
                min.stderr,
                b.rhs,
                b.t1,
                b.rhs_exact,
                b.cov_nonzero,
                verdict(b.pass()),
                verdict(b.pass_exact()),
            );
        }
        for bound in [Bound::Theorem1, Bound::Theorem2] {
            for act in [Nonlinearity::Relu, Nonlinearity::Softplus] {
                let (p, n) = self.count(bound, act, false);
                let (pe, _) = self.count(bound, act, true);
                if n > 0 {
                    let _ = writeln!(out, "{bound:?} {}: {p}/{n} pass (jensen form {pe}/{n})", act.name());
                }
            }
        }
        let _ = writeln!(
            out,
            "MCAR covariances statistically zero: {}",
            if self.mcar_cov_zero() { "yes" } else { "no" }
        );
        out
    }
}

/// Runs both bounds on every spec: the first under each MCAR rate, the second
/// under the MAR generator and under MCAR at the same rate.
pub fn run_suite(spec: &TheorySpec) -> Result<SuiteReport, TheoryError> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &act in &spec.activations {
        let mut slope_rng = ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, 0x510e]));
        for (i, net) in spec.specs(act).iter().enumerate() {
            net.validate()?;
            let slope = uniform(&mut slope_rng, spec.mar_slope);
            for (ri, &rate) in spec.mcar_rates.iter().enumerate() {
                let seed = mix_seed(&[spec.seed, i as u64, 1, ri as u64]);
                rows.push(SuiteRow {
                    spec_index: i,
                    widths: net.widths.clone(),
                    report: check_theorem1(net, rate, spec.samples, seed),
                });
            }
            for (k, mask) in [
                MaskGen::Mar {
                    rate: spec.mar_rate,
                    slope,
                },
                MaskGen::Mcar { rate: spec.mar_rate },
            ]
            .into_iter()
            .enumerate()
            {
                let seed = mix_seed(&[spec.seed, i as u64, 2, k as u64]);
                rows.push(SuiteRow {
                    spec_index: i,
                    widths: net.widths.clone(),
                    report: check_theorem2(net, mask, spec.samples, seed),
                });
            }
        }
    }
    Ok(SuiteReport {
        samples: spec.samples,
        rows,
    })
}
