//! Experiment grid runner: configs, per-run jobs, aggregation and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, DataError, NormRange, Schema, TabularDataset, Task};
use crate::frontend::{FrontEndOptions, Method};
use crate::metrics;
use crate::missingness::{self, MarRule, Mechanism, MissingnessError, MissingnessSpec};
use crate::train::{self, Model, TrainConfig, TrainError};

/// Rates that always get a column in rendered tables.
pub const STANDARD_RATES: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Missingness(#[from] MissingnessError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metric(#[from] metrics::MetricError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("results error: {0}")]
    Results(String),
}

impl ExperimentError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Count(5)
    }
}

impl Seeds {
    pub fn values(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Bundled dataset name, resolved to `<data root>/<name>.toml`.
    #[serde(default)]
    pub name: Option<String>,
    /// Explicit schema path; relative paths resolve against the config file.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub range: Option<NormRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingConfig {
    pub mechanism: Mechanism,
    #[serde(default)]
    pub mar_dependency: Vec<MarRule>,
    #[serde(default = "default_slope")]
    pub mar_slope: f64,
    /// Absolute MAR share of a `mixture`; the rest is MCAR top-up.
    #[serde(default)]
    pub mar_rate: Option<f64>,
}

fn default_slope() -> f64 {
    2.0
}

impl Default for MissingConfig {
    fn default() -> Self {
        Self {
            mechanism: Mechanism::Mcar,
            mar_dependency: Vec::new(),
            mar_slope: default_slope(),
            mar_rate: None,
        }
    }
}

fn default_folds() -> usize {
    10
}

fn default_test_fraction() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetConfig,
    pub methods: Vec<Method>,
    pub rates: Vec<f64>,
    #[serde(default)]
    pub missingness: MissingConfig,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Train and evaluate only the first `fold_limit` folds of the split.
    #[serde(default)]
    pub fold_limit: Option<usize>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub front_end: FrontEndOptions,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Directory of the file the config was read from.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg =
            Self::from_toml(&text).map_err(|e| ExperimentError::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("config error: "))))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn schema_path(&self) -> Result<PathBuf, ExperimentError> {
        let path = match (&self.dataset.schema, &self.dataset.name) {
            (Some(p), _) if p.is_absolute() => p.clone(),
            (Some(p), _) => self.base_dir.clone().unwrap_or_default().join(p),
            (None, Some(name)) => dataset::data_root().join(format!("{name}.toml")),
            (None, None) => return Err(ExperimentError::Config("dataset needs `name` or `schema`".into())),
        };
        if !path.exists() {
            return Err(ExperimentError::Config(format!("schema file {} does not exist", path.display())));
        }
        Ok(path)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.methods.is_empty() || self.rates.is_empty() {
            return bad("methods and rates must be non-empty".into());
        }
        if let Some(r) = self.rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return bad(format!("rate {r} outside [0, 1)"));
        }
        if self.seeds.values().is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.fold_limit == Some(0) {
            return bad("fold_limit must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.test_fraction) || self.test_fraction == 0.0 {
            return bad(format!("test_fraction {} outside (0, 1)", self.test_fraction));
        }
        self.train.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.front_end.main.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        let schema_path = self.schema_path()?;
        let schema = Schema::load(&schema_path).map_err(|e| ExperimentError::Config(e.to_string()))?;
        if !schema.file.exists() {
            return bad(format!("data file {} does not exist", schema.file.display()));
        }
        Ok(())
    }

    /// SHA-256 over the canonical TOML form of the config.
    pub fn fingerprint(&self) -> String {
        train::fingerprint(&toml::to_string(self).expect("config serializes"))
    }

    pub fn load_dataset(&self) -> Result<TabularDataset, ExperimentError> {
        let mut ds = dataset::load_schema_file(&self.schema_path()?)?;
        if let Some(r) = self.dataset.range {
            ds.range = r;
        }
        Ok(ds)
    }
}

/// Stateless 64-bit mixer used to derive per-job seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

fn rate_key(rate: f64) -> u64 {
    (rate * 1e6).round() as u64
}

/// Dataset with missingness injected for one (seed, rate).
pub fn inject_for(ds: &TabularDataset, missing: &MissingConfig, rate: f64, seed: u64) -> Result<TabularDataset, MissingnessError> {
    let spec = MissingnessSpec {
        mechanism: missing.mechanism,
        target_rate: rate,
        seed: mix_seed(&[seed, rate_key(rate), 1]),
        mar_dependency: missing.mar_dependency.clone(),
        mar_slope: missing.mar_slope,
        mar_rate: missing.mar_rate,
    };
    if rate == 0.0 {
        return Ok(ds.clone());
    }
    missingness::apply(ds, &spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub method: Method,
    /// Rate in parts per million.
    pub rate_ppm: u64,
}

impl CellKey {
    pub fn rate(&self) -> f64 {
        self.rate_ppm as f64 / 1e6
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub dataset: String,
    pub method: Method,
    pub rate: f64,
    pub seed: u64,
    pub fold: usize,
    /// AUROC (classification) or MSE (regression).
    pub value: Option<f64>,
    pub auroc_exact: Option<f64>,
    pub epochs: usize,
    pub best_epoch: usize,
    pub gate: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct Job {
    method: Method,
    rate_index: usize,
    seed_index: usize,
    fold: usize,
}

fn run_job(
    cfg: &ExperimentConfig,
    injected: &TabularDataset,
    split: &dataset::FoldSplit,
    method: Method,
) -> Result<(f64, Option<f64>, train::TrainReport, Option<f64>), ExperimentError> {
    let ds = dataset::normalize(injected, injected.range, &split.train);
    let tc = TrainConfig {
        seed: mix_seed(&[split.seed, split.fold as u64, 2]),
        ..cfg.train.clone()
    };
    let mut model = Model::build(method, ds.n_features, &cfg.front_end, &tc, ds.task)?;
    let report = train::train(&mut model, &ds, &split.train, &split.validation, &tc)?;
    assert!(
        report.rows_seen.iter().all(|r| split.test.binary_search(r).is_err()),
        "test rows leaked into training"
    );
    let scores = model.predict(&ds, &split.test)?;
    let targets: Vec<f64> = split.test.iter().map(|&r| ds.target[r]).collect();
    let (value, exact) = match ds.task {
        Task::Classification => {
            let labels: Vec<u8> = targets.iter().map(|&t| t as u8).collect();
            (metrics::auroc_riemann(&scores, &labels)?, Some(metrics::auroc_exact(&scores, &labels)?))
        }
        Task::Regression => (metrics::mse(&scores, &targets)?, None),
    };
    let gate = model.gate();
    Ok((value, exact, report, gate))
}

/// Runs the full grid on a pool of `jobs` worker threads.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ResultsTable, ExperimentError> {
    let ds = cfg.load_dataset()?;
    let seeds = cfg.seeds.values();
    let splits: Vec<Vec<dataset::FoldSplit>> = seeds
        .iter()
        .map(|&s| dataset::stratified_folds(&ds, cfg.test_fraction, cfg.folds, s))
        .collect::<Result<_, _>>()?;
    let n_folds = cfg.fold_limit.unwrap_or(cfg.folds).min(cfg.folds);
    // injected[rate][seed]
    let injected: Vec<Vec<Result<TabularDataset, String>>> = cfg
        .rates
        .iter()
        .map(|&rate| {
            seeds
                .iter()
                .map(|&s| inject_for(&ds, &cfg.missingness, rate, s).map_err(|e| e.to_string()))
                .collect()
        })
        .collect();
    let mut grid = Vec::new();
    for &method in &cfg.methods {
        for rate_index in 0..cfg.rates.len() {
            for seed_index in 0..seeds.len() {
                for fold in 0..n_folds {
                    grid.push(Job {
                        method,
                        rate_index,
                        seed_index,
                        fold,
                    });
                }
            }
        }
    }
    info!("{}: {} runs on {} worker(s)", cfg.name, grid.len(), jobs.max(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut records: Vec<RunRecord> = pool.install(|| {
        grid.par_iter()
            .map(|job| {
                let rate = cfg.rates[job.rate_index];
                let seed = seeds[job.seed_index];
                let mut rec = RunRecord {
                    dataset: ds.name.clone(),
                    method: job.method,
                    rate,
                    seed,
                    fold: job.fold,
                    value: None,
                    auroc_exact: None,
                    epochs: 0,
                    best_epoch: 0,
                    gate: None,
                    error: None,
                };
                let outcome = injected[job.rate_index][job.seed_index]
                    .as_ref()
                    .map_err(|e| e.clone())
                    .and_then(|data| {
                        run_job(cfg, data, &splits[job.seed_index][job.fold], job.method).map_err(|e| e.to_string())
                    });
                match outcome {
                    Ok((value, exact, report, gate)) => {
                        rec.value = Some(value);
                        rec.auroc_exact = exact;
                        rec.epochs = report.epochs_run;
                        rec.best_epoch = report.best_epoch;
                        rec.gate = gate;
                        info!(
                            "{} {} rate {rate} seed {seed} fold {}: {value:.4} after {} epochs",
                            ds.name, job.method, job.fold, report.epochs_run
                        );
                    }
                    Err(e) => {
                        warn!("{} {} rate {rate} seed {seed} fold {} failed: {e}", ds.name, job.method, job.fold);
                        rec.error = Some(e);
                    }
                }
                rec
            })
            .collect()
    });
    records.sort_by(|a, b| {
        (a.method, rate_key(a.rate), a.seed, a.fold).cmp(&(b.method, rate_key(b.rate), b.seed, b.fold))
    });
    Ok(ResultsTable::from_runs(ds.name.clone(), ds.task, cfg.fingerprint(), seeds, records))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub dataset: String,
    pub method: Method,
    pub rate: f64,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
    /// Failure message of the first failed run, if any.
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub metric: String,
    pub fingerprint: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<Cell>,
    pub runs: Vec<RunRecord>,
}

fn metric_name(task: Task) -> &'static str {
    match task {
        Task::Classification => "auroc",
        Task::Regression => "mse",
    }
}

impl ResultsTable {
    /// Per-seed value = mean over folds; cell = mean ± sample std over seeds.
    pub fn from_runs(dataset: String, task: Task, fingerprint: String, seeds: Vec<u64>, runs: Vec<RunRecord>) -> Self {
        let mut grouped: BTreeMap<CellKey, BTreeMap<u64, Vec<&RunRecord>>> = BTreeMap::new();
        for r in &runs {
            grouped
                .entry(CellKey {
                    method: r.method,
                    rate_ppm: rate_key(r.rate),
                })
                .or_default()
                .entry(r.seed)
                .or_default()
                .push(r);
        }
        let cells = grouped
            .into_iter()
            .map(|(key, by_seed)| {
                let failed = by_seed.values().flatten().find_map(|r| r.error.clone());
                let per_seed: Vec<f64> = by_seed
                    .values()
                    .map(|rs| rs.iter().filter_map(|r| r.value).sum::<f64>() / rs.len() as f64)
                    .collect();
                let (mean, std) = if failed.is_some() {
                    (f64::NAN, f64::NAN)
                } else if per_seed.len() >= 2 {
                    metrics::aggregate(&per_seed).expect("two or more seeds")
                } else {
                    (per_seed[0], 0.0)
                };
                Cell {
                    dataset: dataset.clone(),
                    method: key.method,
                    rate: key.rate(),
                    mean,
                    std,
                    seeds: per_seed.len(),
                    failed,
                }
            })
            .collect();
        Self {
            metric: metric_name(task).into(),
            fingerprint,
            seeds,
            cells,
            runs,
        }
    }

    pub fn any_failed(&self) -> bool {
        self.cells.iter().any(|c| c.failed.is_some())
    }

    pub fn cell(&self, method: Method, rate: f64) -> Option<&Cell> {
        self.cells.iter().find(|c| c.method == method && rate_key(c.rate) == rate_key(rate))
    }

    /// Aggregated cells as CSV.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dataset", "method", "rate", "metric", "mean", "std", "seeds", "status", "fingerprint"])
            .expect("in-memory write");
        for c in &self.cells {
            w.write_record([
                c.dataset.clone(),
                c.method.to_string(),
                format!("{:?}", c.rate),
                self.metric.clone(),
                format!("{:?}", c.mean),
                format!("{:?}", c.std),
                c.seeds.to_string(),
                c.failed.clone().map_or_else(|| "ok".to_string(), |e| format!("failed: {e}")),
                self.fingerprint.clone(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Parses [`ResultsTable::to_csv`] output (raw runs are not included).
    pub fn from_csv(text: &str) -> Result<Self, ExperimentError> {
        let bad = |m: String| ExperimentError::Results(m);
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut cells = Vec::new();
        let mut metric = String::new();
        let mut fingerprint = String::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let field = |k: usize| rec.get(k).ok_or_else(|| bad(format!("row {}: missing column {k}", i + 1)));
            let num = |k: usize| -> Result<f64, ExperimentError> {
                field(k)?.parse().map_err(|_| bad(format!("row {}: bad number in column {k}", i + 1)))
            };
            metric = field(3)?.to_string();
            fingerprint = field(8)?.to_string();
            let status = field(7)?;
            cells.push(Cell {
                dataset: field(0)?.to_string(),
                method: field(1)?.parse().map_err(|e: crate::frontend::FrontEndError| bad(e.to_string()))?,
                rate: num(2)?,
                mean: num(4)?,
                std: num(5)?,
                seeds: field(6)?.parse().map_err(|_| bad(format!("row {}: bad seed count", i + 1)))?,
                failed: status.strip_prefix("failed: ").map(str::to_string),
            });
        }
        if cells.is_empty() {
            return Err(bad("no result rows".into()));
        }
        Ok(Self {
            metric,
            fingerprint,
            seeds: Vec::new(),
            cells,
            runs: Vec::new(),
        })
    }

    /// Raw per-run rows as CSV, key-sorted.
    pub fn runs_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:?}"));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "dataset", "method", "rate", "seed", "fold", "value", "auroc_exact", "epochs", "best_epoch", "gate", "error",
        ])
        .expect("in-memory write");
        for r in &self.runs {
            w.write_record([
                r.dataset.clone(),
                r.method.to_string(),
                format!("{:?}", r.rate),
                r.seed.to_string(),
                r.fold.to_string(),
                opt(r.value),
                opt(r.auroc_exact),
                r.epochs.to_string(),
                r.best_epoch.to_string(),
                opt(r.gate),
                r.error.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Aligned text table per dataset: one row per method, one column per rate.
    pub fn render_table(&self) -> Result<String, ExperimentError> {
        if self.cells.is_empty() {
            return Err(ExperimentError::Results("no results to render".into()));
        }
        let mut rates: Vec<u64> = STANDARD_RATES.iter().map(|&r| rate_key(r)).collect();
        for c in &self.cells {
            let k = rate_key(c.rate);
            if !rates.contains(&k) {
                rates.push(k);
            }
        }
        rates.sort_unstable();
        let mut datasets: Vec<&str> = self.cells.iter().map(|c| c.dataset.as_str()).collect();
        datasets.dedup();
        let mut out = String::new();
        for ds in datasets {
            let mut rows: Vec<Vec<String>> = Vec::new();
            let mut header = vec!["MR".to_string()];
            header.extend(rates.iter().map(|&k| format_rate(k as f64 / 1e6)));
            rows.push(header);
            let mut methods: Vec<Method> = self.cells.iter().filter(|c| c.dataset == ds).map(|c| c.method).collect();
            methods.sort();
            methods.dedup();
            for m in methods {
                let mut row = vec![m.label().to_string()];
                for &k in &rates {
                    let cell = self
                        .cells
                        .iter()
                        .find(|c| c.dataset == ds && c.method == m && rate_key(c.rate) == k);
                    row.push(match cell {
                        None => "-".into(),
                        Some(c) if c.failed.is_some() => "failed".into(),
                        Some(c) => format!("{:.4} ± {:.4}", c.mean, c.std),
                    });
                }
                rows.push(row);
            }
            let widths: Vec<usize> = (0..rows[0].len())
                .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
                .collect();
            let _ = writeln!(out, "{ds} ({})", self.metric.to_uppercase());
            for row in rows {
                let line: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
                    .collect();
                let _ = writeln!(out, "{}", line.join("  ").trim_end());
            }
        }
        Ok(out)
    }

    /// Writes `results.csv`, `runs.csv` and `table.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), ExperimentError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let files = [
            ("results.csv", self.to_csv()),
            ("runs.csv", self.runs_csv()),
            ("table.txt", self.render_table()?),
        ];
        for (name, text) in files {
            let p = dir.join(name);
            fs::write(&p, text).map_err(io_err(&p))?;
        }
        Ok(())
    }

    /// Reads `results.csv` from a directory written by [`ResultsTable::write_to`].
    pub fn read_from(dir: &Path) -> Result<Self, ExperimentError> {
        let p = dir.join("results.csv");
        let text = fs::read_to_string(&p).map_err(io_err(&p))?;
        Self::from_csv(&text)
    }
}

fn format_rate(rate: f64) -> String {
    let pct = rate * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}%", pct.round() as i64)
    } else {
        format!("{pct}%")
    }
}

/// Standalone injection job for snapshot export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub missingness: MissingConfig,
    pub rate: f64,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub stem: Option<String>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl InjectConfig {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        if !(0.0..1.0).contains(&cfg.rate) {
            return Err(ExperimentError::Config(format!("rate {} outside [0, 1)", cfg.rate)));
        }
        Ok(cfg)
    }

    /// Injects missingness and writes a values/mask/meta snapshot.
    pub fn run(&self) -> Result<dataset::SnapshotPaths, ExperimentError> {
        let as_experiment = ExperimentConfig {
            name: "inject".into(),
            dataset: self.dataset.clone(),
            methods: vec![Method::Zimc],
            rates: vec![self.rate],
            missingness: self.missingness.clone(),
            seeds: Seeds::List(vec![self.seed]),
            folds: default_folds(),
            fold_limit: None,
            test_fraction: default_test_fraction(),
            train: TrainConfig::default(),
            front_end: FrontEndOptions::default(),
            output_dir: None,
            base_dir: self.base_dir.clone(),
        };
        let ds = as_experiment.load_dataset()?;
        let out = inject_for(&ds, &self.missingness, self.rate, self.seed)?;
        info!("{}: missing rate {:.4} -> {:.4}", ds.name, ds.missing_rate(), out.missing_rate());
        let stem = self
            .stem
            .clone()
            .unwrap_or_else(|| format!("{}_{}_{}", ds.name, format_rate(self.rate).trim_end_matches('%'), self.seed));
        let dir = match (&self.base_dir, self.output_dir.is_relative()) {
            (Some(base), true) => base.join(&self.output_dir),
            _ => self.output_dir.clone(),
        };
        Ok(dataset::save_snapshot(&out, &dir, &stem)?)
    }
}
