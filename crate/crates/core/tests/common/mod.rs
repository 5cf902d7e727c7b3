#![allow(dead_code)]

use attn_impute::autodiff::{self, Graph, Var};
use attn_impute::baselines::FilmLayer;
use attn_impute::gradcheck::{self, GradCheck, DEFAULT_STEP};
use attn_impute::main_layer::{opacity_gate, GateBlend, MainLayer, MainLayerConfig, ScoreKind};
use attn_impute::nn::{Activation, Bound, Mlp, ParamSet};
use attn_impute::pev;
use attn_impute::tensor::{Tensor, TensorError};
use attn_impute::train::{Model, TrainConfig};
use attn_impute::{FrontEnd, InputBatch, Method};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_TOLERANCE: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random batch with roughly a third of the cells missing and at least one
/// observed cell per row.
pub fn random_batch(rng: &mut ChaCha8Rng, rows: usize, n: usize) -> InputBatch {
    let mut b = InputBatch::new(n);
    for _ in 0..rows {
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut mask: Vec<u8> = (0..n).map(|_| u8::from(rng.gen::<f64>() > 0.35)).collect();
        mask[rng.gen_range(0..n)] = 1;
        b.push(&values, &mask);
    }
    b
}

/// Random-projection scalar `Σ out ⊙ r` so every output coordinate matters.
fn project_to_scalar(g: &mut Graph, out: Var, seed: u64) -> Result<Var, TensorError> {
    let shape = g.shape(out).to_vec();
    let n: usize = shape.iter().product();
    let mut r = rng(seed ^ 0xabc);
    let w = Tensor::new(&shape, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect())?;
    let w = g.constant(w);
    let prod = g.mul(out, w)?;
    Ok(g.sum(prod))
}

/// Perturbs every parameter so zero or constant initialisations do not hide bugs.
fn jitter(params: &mut ParamSet, rng: &mut ChaCha8Rng, scale: f64) {
    for p in params.iter_mut() {
        for v in p.value.data_mut() {
            *v += rng.gen_range(-scale..scale);
        }
    }
}

/// Inputs closer than this to a ReLU/SELU kink are redrawn.
pub const KINK_MARGIN: f64 = 100.0 * DEFAULT_STEP;

/// Gradient check of a scalar function, or `None` when the point is too close
/// to a kink for central differences to mean anything.
fn smooth_check<F>(inputs: &[Tensor], f: F) -> Option<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, TensorError>,
{
    if gradcheck::kink_distance(inputs, &f).expect("forward runs") < KINK_MARGIN {
        return None;
    }
    Some(gradcheck::check(inputs, DEFAULT_STEP, f).expect("gradient check runs"))
}

/// Checks every parameter tensor of `params` through `forward`.
fn check_params<F>(params: &ParamSet, seed: u64, forward: F) -> Option<GradCheck>
where
    F: Fn(&mut Graph, &Bound) -> Result<Var, TensorError>,
{
    let tensors: Vec<Tensor> = params.iter().map(|p| p.value.clone()).collect();
    smooth_check(&tensors, |g, vars| {
        let bound = Bound::from_vars(vars.to_vec());
        let out = forward(g, &bound)?;
        project_to_scalar(g, out, seed)
    })
}

/// Reruns `case` on fresh draws until one lands away from every kink.
fn retry<T>(seed: u64, mut case: impl FnMut(&mut ChaCha8Rng) -> Option<T>) -> T {
    let mut r = rng(seed);
    for _ in 0..100 {
        if let Some(out) = case(&mut r) {
            return out;
        }
    }
    panic!("seed {seed}: no draw clear of kinks");
}

fn named(params: &ParamSet, check: GradCheck) -> Vec<(String, f64)> {
    params.iter().zip(check.rel_errors).map(|(p, e)| (p.name.clone(), e)).collect()
}

fn small_main_config(score: ScoreKind, tie: bool, blend: GateBlend) -> MainLayerConfig {
    MainLayerConfig {
        num_heads: 2,
        emb_dim: 8,
        key_dim: if score == ScoreKind::General { 4 } else { 8 },
        transform_hidden: 16,
        score,
        tie_value_projection: tie,
        blend,
    }
}

fn main_case(seed: u64, config: MainLayerConfig) -> Vec<(String, f64)> {
    retry(seed, |r| main_draw(r, seed, config.clone()))
}

fn main_draw(r: &mut ChaCha8Rng, seed: u64, config: MainLayerConfig) -> Option<Vec<(String, f64)>> {
    let n = 5;
    let mut ps = ParamSet::new();
    let layer = MainLayer::new(&mut ps, "main", n, config, r).expect("valid config");
    jitter(&mut ps, r, 0.3);
    let batch = random_batch(r, 3, n);
    let aug = batch.augmented().expect("batch");
    let check = check_params(&ps, seed, |g, bound| {
        let a = g.constant(aug.clone());
        layer
            .forward(g, bound, a, batch.rows)
            .map(|t| t.output)
            .map_err(|e| TensorError::Invalid(e.to_string()))
    })?;
    Some(named(&ps, check))
}

fn film_case(seed: u64) -> Vec<(String, f64)> {
    retry(seed, |r| {
        let n = 6;
        let mut ps = ParamSet::new();
        let layer = FilmLayer::new(&mut ps, "film", n, r);
        jitter(&mut ps, r, 0.3);
        let batch = random_batch(r, 4, n);
        let check = check_params(&ps, seed, |g, bound| {
            let masked = g.constant(batch.values_tensor());
            let mask = g.constant(batch.mask_tensor());
            Ok(layer.forward(g, bound, masked, mask)?.output)
        })?;
        Some(named(&ps, check))
    })
}

fn mlp_case(seed: u64) -> Vec<(String, f64)> {
    retry(seed, |r| {
        let mut ps = ParamSet::new();
        let mlp = Mlp::new(&mut ps, "dsm", &[6, 12, 12, 12, 12, 1], Activation::Selu, Activation::Sigmoid, r);
        jitter(&mut ps, r, 0.1);
        let x = Tensor::new(&[5, 6], (0..30).map(|_| r.gen_range(-1.5..1.5)).collect()).expect("shape");
        let check = check_params(&ps, seed, |g, bound| {
            let xv = g.constant(x.clone());
            mlp.forward(g, bound, xv)
        })?;
        Some(named(&ps, check))
    })
}

fn gate_case(seed: u64) -> Vec<(String, f64)> {
    let mut r = rng(seed);
    let a = Tensor::new(&[4, 3], (0..12).map(|_| r.gen_range(-1.0..1.0)).collect()).expect("shape");
    let b = Tensor::new(&[4, 3], (0..12).map(|_| r.gen_range(-1.0..1.0)).collect()).expect("shape");
    let logit = Tensor::scalar(r.gen_range(-2.0..2.0));
    let check = gradcheck::check(&[a, b, logit], DEFAULT_STEP, |g, v| -> Result<Var, TensorError> {
        let (_, out) = opacity_gate(g, v[0], v[1], v[2])?;
        project_to_scalar(g, out, seed)
    })
    .expect("gradient check runs");
    vec![
        ("gate.imputed".into(), check.rel_errors[0]),
        ("gate.base".into(), check.rel_errors[1]),
        ("gate.logit".into(), check.rel_errors[2]),
    ]
}

fn loss_case(seed: u64) -> Vec<(String, f64)> {
    let mut r = rng(seed);
    let n = 8;
    let p = Tensor::new(&[n, 1], (0..n).map(|_| r.gen_range(0.05..0.95)).collect()).expect("shape");
    let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let w: Vec<f64> = (0..n).map(|_| r.gen_range(0.3..3.0)).collect();
    let bce = gradcheck::check(&[p.clone()], DEFAULT_STEP, |g, v| g.weighted_bce(v[0], &y, &w)).expect("runs");
    let t: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mse = gradcheck::check(&[p], DEFAULT_STEP, |g, v| g.mse(v[0], &t)).expect("runs");
    vec![
        ("loss.weighted_bce".into(), bce.max_rel_error()),
        ("loss.mse".into(), mse.max_rel_error()),
    ]
}

/// Joint model: front-end and downstream parameters through the training loss.
fn joint_case(seed: u64, method: Method) -> Vec<(String, f64)> {
    let cfg = TrainConfig {
        hidden_layers: 2,
        hidden_width: 8,
        seed,
        ..TrainConfig::default()
    };
    let opts = attn_impute::frontend::FrontEndOptions {
        main: small_main_config(ScoreKind::ScaledDot, true, GateBlend::Query),
        ..Default::default()
    };
    let base = Model::build(method, 4, &opts, &cfg, attn_impute::dataset::Task::Classification).expect("model");
    let check = retry(seed, |r| {
        let mut params = base.params.clone();
        jitter(&mut params, r, 0.2);
        let batch = random_batch(r, 4, 4);
        let y = [0.0, 1.0, 1.0, 0.0];
        let w = [0.8, 1.3, 1.3, 0.8];
        let front: &FrontEnd = &base.front;
        let downstream = &base.downstream;
        let tensors: Vec<Tensor> = params.iter().map(|p| p.value.clone()).collect();
        smooth_check(&tensors, |g, vars| {
            let bound = Bound::from_vars(vars.to_vec());
            let h = front.forward(g, &bound, &batch).map_err(|e| TensorError::Invalid(e.to_string()))?;
            let p = downstream.forward(g, &bound, h)?;
            g.weighted_bce(p, &y, &w)
        })
    });
    vec![(format!("joint.{method}"), check.max_rel_error())]
}

/// Derivative of SELU at 100 points against central differences
/// (the kink at 0 is excluded by construction of the grid).
pub fn selu_derivative_error() -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let x = -4.0 + 8.0 * (i as f64 + 0.5) / 100.0;
        let mut g = Graph::new();
        let v = g.param(Tensor::scalar(x));
        let y = g.selu(v);
        g.backward(y).expect("scalar");
        let analytic = g.grad(v).expect("grad")[0];
        let h = DEFAULT_STEP;
        let numeric = (autodiff::selu(x + h) - autodiff::selu(x - h)) / (2.0 * h);
        worst = worst.max(gradcheck::relative_error(&[analytic], &[numeric]));
    }
    worst
}

/// Worst relative error for every checked component over `seeds`.
pub fn gradient_suite(seeds: std::ops::Range<u64>) -> Vec<(String, f64)> {
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut record = |name: String, err: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some(entry) => entry.1 = entry.1.max(err),
        None => worst.push((name, err)),
    };
    for seed in seeds {
        let mut cases = Vec::new();
        cases.extend(main_case(seed, small_main_config(ScoreKind::ScaledDot, true, GateBlend::Query)));
        cases.extend(
            main_case(seed, small_main_config(ScoreKind::General, false, GateBlend::RawProjection))
                .into_iter()
                .map(|(n, e)| (format!("{n}[general,untied,raw]"), e)),
        );
        cases.extend(film_case(seed));
        cases.extend(mlp_case(seed));
        cases.extend(gate_case(seed));
        cases.extend(loss_case(seed));
        for m in Method::ALL {
            cases.extend(joint_case(seed, m));
        }
        for (n, e) in cases {
            record(n, e);
        }
    }
    record("selu.derivative".into(), selu_derivative_error());
    worst
}

/// Worst deviation of any attention row sum from 1, plus the smallest weight.
pub fn attention_row_stochastic(trials: u64) -> (f64, f64) {
    let mut worst: f64 = 0.0;
    let mut min_weight = f64::INFINITY;
    for seed in 0..trials {
        let mut r = rng(1000 + seed);
        let n = r.gen_range(2..12);
        let cfg = MainLayerConfig {
            num_heads: 4,
            emb_dim: 16,
            key_dim: 16,
            ..MainLayerConfig::default()
        };
        let mut ps = ParamSet::new();
        let layer = MainLayer::new(&mut ps, "main", n, cfg, &mut r).expect("config");
        jitter(&mut ps, &mut r, 1.0);
        let batch = random_batch(&mut r, 3, n);
        let mut g = Graph::new();
        let bound = ps.bind_frozen(&mut g);
        let aug = g.constant(batch.augmented().expect("batch"));
        let trace = layer.forward(&mut g, &bound, aug, batch.rows).expect("forward");
        let w = g.value(trace.attention);
        for row in w.data().chunks(n) {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            min_weight = min_weight.min(row.iter().copied().fold(f64::INFINITY, f64::min));
        }
    }
    (worst, min_weight)
}

/// Count of gate outputs falling outside the interval spanned by their operands.
pub fn gate_convexity_violations(trials: u64) -> usize {
    let mut bad = 0;
    for seed in 0..trials {
        let mut r = rng(2000 + seed);
        let a = Tensor::new(&[6], (0..6).map(|_| r.gen_range(-5.0..5.0)).collect()).expect("shape");
        let b = Tensor::new(&[6], (0..6).map(|_| r.gen_range(-5.0..5.0)).collect()).expect("shape");
        let mut g = Graph::new();
        let (av, bv) = (g.constant(a.clone()), g.constant(b.clone()));
        let logit = g.constant(Tensor::scalar(r.gen_range(-8.0..8.0)));
        let (_, out) = opacity_gate(&mut g, av, bv, logit).expect("shapes");
        for ((&o, &x), &y) in g.value(out).data().iter().zip(a.data()).zip(b.data()) {
            let (lo, hi) = (x.min(y), x.max(y));
            if o < lo - 1e-12 || o > hi + 1e-12 {
                bad += 1;
            }
        }
    }
    bad
}

/// Problems found with PEV encodings over random inputs of sizes `1..=max_n`.
pub fn pev_invariant_failures(max_n: usize, seed: u64) -> Vec<String> {
    let mut failures = Vec::new();
    let mut r = rng(seed);
    for n in 1..=max_n {
        let x: Vec<Option<f64>> = (0..n)
            .map(|_| if r.gen::<f64>() < 0.3 { None } else { Some(r.gen_range(-1.0..1.0)) })
            .collect();
        let (m, mask) = pev::pev_mask_generator(&x).expect("non-empty");
        let bw = pev::bit_width(n);
        if m.rows != n || m.width() != 2 + bw || bw != (n as f64).log2().ceil().max(1.0) as usize {
            failures.push(format!("n={n}: shape {}x{}", m.rows, m.width()));
        }
        let mut codes: Vec<&[u8]> = m.position_codes.iter().map(Vec::as_slice).collect();
        codes.sort();
        codes.dedup();
        if codes.len() != n {
            failures.push(format!("n={n}: duplicate position codes"));
        }
        let expected: Vec<f64> = x.iter().map(|v| v.unwrap_or(0.0)).collect();
        if m.masked_values() != expected {
            failures.push(format!("n={n}: values do not round-trip"));
        }
        if mask != x.iter().map(|v| u8::from(v.is_some())).collect::<Vec<_>>() {
            failures.push(format!("n={n}: mask mismatch"));
        }
        // observed zero against missing at one position
        let k = r.gen_range(0..n);
        let mut zero = x.clone();
        zero[k] = Some(0.0);
        let mut missing = x.clone();
        missing[k] = None;
        let (pz, _) = pev::pev_mask_generator(&zero).expect("non-empty");
        let (pm, _) = pev::pev_mask_generator(&missing).expect("non-empty");
        if pz.augmented == pm.augmented {
            failures.push(format!("n={n}: observed zero equals missing"));
        }
    }
    failures
}

/// Mann-Whitney pair count: the probability a positive outscores a negative,
/// ties counting one half.
pub fn pairwise_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] == 0 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            wins += if si > sj {
                1.0
            } else if si == sj {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

/// Random score/label set: size, class balance and separation all vary.
/// Sizes start at 100, the scale of the smallest test split; below that a
/// single pair sharing a grid bin can move the Riemann sum by over 0.01.
pub fn random_scored_instance(r: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
    let n = r.gen_range(100..1000);
    let p = r.gen_range(0.1..0.9);
    let shift: f64 = r.gen_range(-0.4..0.8);
    let mut labels: Vec<u8> = (0..n).map(|_| u8::from(r.gen::<f64>() < p)).collect();
    labels[0] = 0;
    labels[1] = 1;
    let scores = labels
        .iter()
        .map(|&l| {
            let base: f64 = r.gen();
            (base * (1.0 - shift.abs()) + shift.max(0.0) * f64::from(l) + (-shift).max(0.0) * f64::from(1 - l))
                .clamp(0.0, 1.0)
        })
        .collect();
    (scores, labels)
}

#[derive(Debug, Clone, Copy)]
pub struct MetricOracleReport {
    pub instances: usize,
    /// `max |riemann − exact|`
    pub riemann_gap: f64,
    /// `max |exact − pairwise|`
    pub exact_gap: f64,
    /// Smallest Riemann AUROC over perfectly separated instances.
    pub perfect_min: f64,
    /// Riemann AUROC of label-independent scores on 20k rows.
    pub random_auroc: f64,
}

pub fn metric_oracle(instances: usize, seed: u64) -> MetricOracleReport {
    use attn_impute::metrics::{auroc_exact, auroc_riemann};
    let mut r = rng(seed);
    let (mut riemann_gap, mut exact_gap): (f64, f64) = (0.0, 0.0);
    for _ in 0..instances {
        let (s, l) = random_scored_instance(&mut r);
        let exact = auroc_exact(&s, &l).expect("two classes");
        riemann_gap = riemann_gap.max((auroc_riemann(&s, &l).expect("two classes") - exact).abs());
        exact_gap = exact_gap.max((exact - pairwise_auroc(&s, &l)).abs());
    }
    let mut perfect_min: f64 = 1.0;
    for _ in 0..100 {
        let n = r.gen_range(10..500);
        let cut: f64 = r.gen_range(0.05..0.95);
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(r.gen::<bool>())).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = labels
            .iter()
            .map(|&l| if l == 1 { r.gen_range(cut..=1.0) } else { r.gen_range(0.0..cut) })
            .collect();
        perfect_min = perfect_min.min(auroc_riemann(&scores, &labels).expect("two classes"));
    }
    let n = 20_000;
    let labels: Vec<u8> = (0..n).map(|_| u8::from(r.gen::<bool>())).collect();
    let scores: Vec<f64> = (0..n).map(|_| r.gen()).collect();
    let random_auroc = auroc_riemann(&scores, &labels).expect("two classes");
    MetricOracleReport {
        instances,
        riemann_gap,
        exact_gap,
        perfect_min,
        random_auroc,
    }
}

/// Worst `|realised − target|` of MCAR injection on the Breast table over
/// `seeds` seeds per rate.
pub fn mcar_calibration(seeds: u64) -> (usize, f64) {
    let ds = breast();
    let mut worst: f64 = 0.0;
    for &rate in &[0.2, 0.4, 0.6, 0.8] {
        for seed in 0..seeds {
            let out = attn_impute::missingness::inject_mcar(&ds, rate, seed).expect("valid rate");
            worst = worst.max((out.missing_rate() - rate).abs());
        }
    }
    (ds.rows, worst)
}

/// Intrinsic Pima missing rate and the realised rate after polluting to each
/// standard target.
pub fn pima_pollution() -> (f64, Vec<(f64, f64)>) {
    let ds = attn_impute::dataset::load_schema_file(&attn_impute::dataset::data_root().join("pima.toml"))
        .expect("pima dataset");
    let hits = [0.2, 0.4, 0.6, 0.8]
        .iter()
        .map(|&t| {
            let out = attn_impute::missingness::pollute_to_rate(&ds, t, 11).expect("target above intrinsic");
            (t, out.missing_rate())
        })
        .collect();
    (ds.missing_rate(), hits)
}

pub fn breast() -> attn_impute::dataset::TabularDataset {
    attn_impute::dataset::load_schema_file(&attn_impute::dataset::data_root().join("breast.toml")).expect("breast dataset")
}
