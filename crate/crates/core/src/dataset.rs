//! CSV ingestion, min-max normalization, stratified splits and snapshot export.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable selecting the directory that dataset schemas and
/// their CSV files are resolved against.
pub const DATA_ROOT_ENV: &str = "ATTN_IMPUTE_DATA";

/// Cell contents treated as missing.
pub const MISSING_TOKENS: [&str; 3] = ["", "NA", "?"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse { row: usize, column: String, value: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("stratum `{stratum}` has {count} members in the training pool, fewer than k = {k}")]
    Stratification { stratum: String, count: usize, k: usize },
    #[error("invalid schema file {path}: {message}")]
    SchemaFile { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Resolved data root: the environment variable if set, else the bundled `data/`.
pub fn data_root() -> PathBuf {
    std::env::var_os(DATA_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NormRange {
    /// `[0, 1]`
    #[default]
    #[serde(rename = "0,1")]
    ZeroOne,
    /// `[-1, 1]`
    #[serde(rename = "-1,1")]
    MinusOneOne,
}

impl NormRange {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            NormRange::ZeroOne => (0.0, 1.0),
            NormRange::MinusOneOne => (-1.0, 1.0),
        }
    }

    pub fn midpoint(self) -> f64 {
        let (lo, hi) = self.bounds();
        (lo + hi) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ColumnKind {
    Numeric,
    Categorical { cardinality: usize },
}

/// Declarative per-dataset description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub name: String,
    /// CSV path, relative to the schema file's directory.
    pub file: PathBuf,
    pub target: String,
    #[serde(default)]
    pub task: Task,
    #[serde(default)]
    pub range: NormRange,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub drop: Vec<String>,
    /// Target value mapped to class 1; all other values map to 0.
    #[serde(default)]
    pub positive_label: Option<String>,
}

impl Schema {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads a schema and resolves its `file` against the schema's directory.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut schema = Self::from_toml(&text).map_err(|e| DataError::SchemaFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if schema.file.is_relative() {
            schema.file = path.parent().unwrap_or(Path::new(".")).join(&schema.file);
        }
        Ok(schema)
    }
}

/// Min and max of a numeric column over observed training cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ColumnStats {
    MinMax { min: f64, max: f64 },
    Constant { value: f64 },
    Categorical { cardinality: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub range: NormRange,
    pub columns: Vec<ColumnStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub rows: usize,
    pub n_features: usize,
    /// Row-major; 0 wherever `mask` is 0.
    pub features: Vec<f64>,
    /// Row-major existence mask, 1 = observed.
    pub mask: Vec<u8>,
    pub target: Vec<f64>,
    pub column_kinds: Vec<ColumnKind>,
    pub task: Task,
    pub range: NormRange,
    pub norm: Option<NormSpec>,
}

impl TabularDataset {
    /// Builds a dataset from dense values and mask, zeroing masked cells.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        name: impl Into<String>,
        feature_names: Vec<String>,
        mut features: Vec<f64>,
        mask: Vec<u8>,
        target: Vec<f64>,
        column_kinds: Vec<ColumnKind>,
        task: Task,
        range: NormRange,
    ) -> Result<Self, DataError> {
        let n = feature_names.len();
        let rows = target.len();
        if features.len() != rows * n || mask.len() != rows * n || column_kinds.len() != n {
            return Err(DataError::Schema(format!(
                "inconsistent shapes: {} values, {} mask cells, {} targets, {} names, {} kinds",
                features.len(),
                mask.len(),
                rows,
                n,
                column_kinds.len()
            )));
        }
        for (v, &m) in features.iter_mut().zip(&mask) {
            if m == 0 {
                *v = 0.0;
            }
        }
        Ok(Self {
            name: name.into(),
            feature_names,
            rows,
            n_features: n,
            features,
            mask,
            target,
            column_kinds,
            task,
            range,
            norm: None,
        })
    }

    pub fn row(&self, i: usize) -> (&[f64], &[u8]) {
        let n = self.n_features;
        (&self.features[i * n..(i + 1) * n], &self.mask[i * n..(i + 1) * n])
    }

    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        let k = row * self.n_features + col;
        (self.mask[k] != 0).then_some(self.features[k])
    }

    /// Fraction of feature cells that are missing.
    pub fn missing_rate(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.mask.iter().filter(|&&m| m == 0).count() as f64 / self.mask.len() as f64
    }

    /// Sets a cell missing (and zeroes it).
    pub fn mask_cell(&mut self, row: usize, col: usize) {
        let k = row * self.n_features + col;
        self.mask[k] = 0;
        self.features[k] = 0.0;
    }

    /// Integer class labels (classification targets).
    pub fn labels(&self) -> Vec<u8> {
        self.target.iter().map(|&t| t as u8).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> TabularDataset {
        let n = self.n_features;
        let mut out = self.clone();
        out.rows = rows.len();
        out.features = rows.iter().flat_map(|&r| self.features[r * n..(r + 1) * n].iter().copied()).collect();
        out.mask = rows.iter().flat_map(|&r| self.mask[r * n..(r + 1) * n].iter().copied()).collect();
        out.target = rows.iter().map(|&r| self.target[r]).collect();
        out
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    MISSING_TOKENS.contains(&c)
}

/// Loads a CSV with a header row according to `schema`.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<TabularDataset, DataError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(DataError::Schema(format!("duplicate header `{h}`")));
        }
    }
    let position = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::Schema(format!("unknown column `{name}`")))
    };
    let target_col = position(&schema.target)?;
    let mut skip: HashSet<usize> = schema.drop.iter().map(|d| position(d)).collect::<Result<_, _>>()?;
    skip.insert(target_col);
    let categorical: HashSet<usize> = schema.categorical.iter().map(|c| position(c)).collect::<Result<_, _>>()?;
    if categorical.contains(&target_col) {
        return Err(DataError::Schema("target cannot be a categorical feature".into()));
    }
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|c| !skip.contains(c)).collect();

    let mut codebooks: HashMap<usize, Vec<String>> = HashMap::new();
    let mut target_codes: Vec<String> = Vec::new();
    let mut features = Vec::new();
    let mut mask = Vec::new();
    let mut target = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        for &c in &feature_cols {
            let cell = record.get(c).unwrap_or("").trim();
            if is_missing(cell) {
                features.push(0.0);
                mask.push(0);
            } else if categorical.contains(&c) {
                let book = codebooks.entry(c).or_default();
                let code = book.iter().position(|v| v == cell).unwrap_or_else(|| {
                    book.push(cell.to_string());
                    book.len() - 1
                });
                features.push(code as f64);
                mask.push(1);
            } else {
                let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                    row,
                    column: headers[c].clone(),
                    value: cell.to_string(),
                })?;
                features.push(v);
                mask.push(1);
            }
        }
        let cell = record.get(target_col).unwrap_or("").trim();
        if is_missing(cell) {
            return Err(DataError::Parse {
                row,
                column: schema.target.clone(),
                value: cell.to_string(),
            });
        }
        let t = match (&schema.positive_label, schema.task) {
            (Some(pos), _) => f64::from(u8::from(cell == pos)),
            (None, Task::Regression) => cell.parse().map_err(|_| DataError::Parse {
                row,
                column: schema.target.clone(),
                value: cell.to_string(),
            })?,
            (None, Task::Classification) => match cell.parse::<f64>() {
                Ok(v) if v >= 0.0 && v.fract() == 0.0 => v,
                _ => {
                    let code = target_codes.iter().position(|v| v == cell).unwrap_or_else(|| {
                        target_codes.push(cell.to_string());
                        target_codes.len() - 1
                    });
                    code as f64
                }
            },
        };
        target.push(t);
    }
    let column_kinds = feature_cols
        .iter()
        .map(|c| {
            if categorical.contains(c) {
                ColumnKind::Categorical {
                    cardinality: codebooks.get(c).map_or(1, Vec::len),
                }
            } else {
                ColumnKind::Numeric
            }
        })
        .collect();
    let names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    let ds = TabularDataset::from_parts(&schema.name, names, features, mask, target, column_kinds, schema.task, schema.range)?;
    info!(
        "loaded {}: {} rows, {} features ({} categorical), {:.2}% missing",
        ds.name,
        ds.rows,
        ds.n_features,
        categorical.len(),
        100.0 * ds.missing_rate()
    );
    Ok(ds)
}

/// Loads a dataset from a schema file.
pub fn load_schema_file(schema_path: &Path) -> Result<TabularDataset, DataError> {
    let schema = Schema::load(schema_path)?;
    load_csv(&schema.file.clone(), &schema)
}

/// Fits per-column statistics on the observed cells of `train_rows`.
pub fn fit_norm(ds: &TabularDataset, train_rows: &[usize], range: NormRange) -> NormSpec {
    let columns = (0..ds.n_features)
        .map(|c| match ds.column_kinds[c] {
            ColumnKind::Categorical { cardinality } => ColumnStats::Categorical { cardinality },
            ColumnKind::Numeric => {
                let observed = train_rows.iter().filter_map(|&r| ds.value(r, c));
                let (min, max) = observed.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                if !min.is_finite() || max - min <= 0.0 {
                    warn!("column `{}` is constant (or unobserved) on the training rows", ds.feature_names[c]);
                    ColumnStats::Constant {
                        value: if min.is_finite() { min } else { 0.0 },
                    }
                } else {
                    ColumnStats::MinMax { min, max }
                }
            }
        })
        .collect();
    NormSpec { range, columns }
}

/// Maps one value of column `stats` into `range`, clipping out-of-range values.
pub fn scale_value(stats: &ColumnStats, range: NormRange, v: f64) -> f64 {
    let (lo, hi) = range.bounds();
    match *stats {
        ColumnStats::MinMax { min, max } => (lo + (hi - lo) * (v - min) / (max - min)).clamp(lo, hi),
        ColumnStats::Constant { .. } => range.midpoint(),
        ColumnStats::Categorical { cardinality } => {
            if cardinality <= 1 {
                range.midpoint()
            } else {
                (lo + (hi - lo) * v / (cardinality - 1) as f64).clamp(lo, hi)
            }
        }
    }
}

/// Applies fitted statistics to every row; missing cells stay 0 and masked.
pub fn apply_norm(ds: &TabularDataset, spec: &NormSpec) -> TabularDataset {
    let mut out = ds.clone();
    let n = ds.n_features;
    for (k, v) in out.features.iter_mut().enumerate() {
        if ds.mask[k] != 0 {
            *v = scale_value(&spec.columns[k % n], spec.range, *v);
        }
    }
    out.range = spec.range;
    out.norm = Some(spec.clone());
    out
}

/// Fits on `train_rows` and applies to every row.
pub fn normalize(ds: &TabularDataset, range: NormRange, train_rows: &[usize]) -> TabularDataset {
    let spec = fit_norm(ds, train_rows, range);
    apply_norm(ds, &spec)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold: usize,
    pub seed: u64,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratum label per row: class code, or target quintile for regression.
pub fn strata(ds: &TabularDataset) -> Vec<usize> {
    match ds.task {
        Task::Classification => ds.target.iter().map(|&t| t as usize).collect(),
        Task::Regression => {
            let mut order: Vec<usize> = (0..ds.rows).collect();
            order.sort_by(|&a, &b| ds.target[a].total_cmp(&ds.target[b]));
            let mut bins = vec![0; ds.rows];
            for (rank, &r) in order.iter().enumerate() {
                bins[r] = (rank * 5 / ds.rows.max(1)).min(4);
            }
            bins
        }
    }
}

/// One stratified hold-out split per seed, then `k` stratified folds inside
/// the remaining pool.
pub fn stratified_folds(ds: &TabularDataset, test_fraction: f64, k: usize, seed: u64) -> Result<Vec<FoldSplit>, DataError> {
    if k < 2 {
        return Err(DataError::Schema(format!("need k >= 2 folds, got {k}")));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(DataError::Schema(format!("test fraction {test_fraction} outside [0, 1)")));
    }
    let labels = strata(ds);
    let mut by_stratum: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (r, &s) in labels.iter().enumerate() {
        by_stratum.entry(s).or_default().push(r);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::new();
    let mut fold_members: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut next_fold = 0;
    for (stratum, members) in &mut by_stratum {
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&members[..n_test]);
        let pool = &members[n_test..];
        if pool.len() < k {
            return Err(DataError::Stratification {
                stratum: stratum.to_string(),
                count: pool.len(),
                k,
            });
        }
        for &r in pool {
            fold_members[next_fold].push(r);
            next_fold = (next_fold + 1) % k;
        }
    }
    test.sort_unstable();
    Ok((0..k)
        .map(|fold| {
            let mut validation = fold_members[fold].clone();
            validation.sort_unstable();
            let mut train: Vec<usize> = fold_members
                .iter()
                .enumerate()
                .filter(|&(f, _)| f != fold)
                .flat_map(|(_, m)| m.iter().copied())
                .collect();
            train.sort_unstable();
            FoldSplit {
                fold,
                seed,
                train,
                validation,
                test: test.clone(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SnapshotMeta {
    name: String,
    task: Task,
    range: NormRange,
    feature_names: Vec<String>,
    column_kinds: Vec<ColumnKind>,
}

/// Paths written by [`save_snapshot`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotPaths {
    pub values: PathBuf,
    pub mask: PathBuf,
    pub meta: PathBuf,
}

impl SnapshotPaths {
    pub fn new(dir: &Path, stem: &str) -> Self {
        Self {
            values: dir.join(format!("{stem}.values.csv")),
            mask: dir.join(format!("{stem}.mask.csv")),
            meta: dir.join(format!("{stem}.meta.toml")),
        }
    }
}

/// Writes values (missing cells empty), mask and column metadata.
pub fn save_snapshot(ds: &TabularDataset, dir: &Path, stem: &str) -> Result<SnapshotPaths, DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let paths = SnapshotPaths::new(dir, stem);
    let mut values = csv::WriterBuilder::new().from_path(&paths.values)?;
    let mut mask = csv::WriterBuilder::new().from_path(&paths.mask)?;
    let mut header = ds.feature_names.clone();
    header.push("target".into());
    values.write_record(&header)?;
    mask.write_record(&ds.feature_names)?;
    for r in 0..ds.rows {
        let (v, m) = ds.row(r);
        let mut rec: Vec<String> = v
            .iter()
            .zip(m)
            .map(|(x, &b)| if b != 0 { x.to_string() } else { String::new() })
            .collect();
        rec.push(ds.target[r].to_string());
        values.write_record(&rec)?;
        mask.write_record(m.iter().map(|b| b.to_string()))?;
    }
    values.flush().map_err(io_err(&paths.values))?;
    mask.flush().map_err(io_err(&paths.mask))?;
    let meta = SnapshotMeta {
        name: ds.name.clone(),
        task: ds.task,
        range: ds.range,
        feature_names: ds.feature_names.clone(),
        column_kinds: ds.column_kinds.clone(),
    };
    let text = toml::to_string(&meta).map_err(|e| DataError::Schema(e.to_string()))?;
    fs::write(&paths.meta, text).map_err(io_err(&paths.meta))?;
    Ok(paths)
}

pub fn load_snapshot(paths: &SnapshotPaths) -> Result<TabularDataset, DataError> {
    let text = fs::read_to_string(&paths.meta).map_err(io_err(&paths.meta))?;
    let meta: SnapshotMeta = toml::from_str(&text).map_err(|e| DataError::SchemaFile {
        path: paths.meta.clone(),
        message: e.to_string(),
    })?;
    let n = meta.feature_names.len();
    let mut features = Vec::new();
    let mut target = Vec::new();
    let mut values = csv::Reader::from_path(&paths.values)?;
    for (r, rec) in values.records().enumerate() {
        let rec = rec?;
        for c in 0..=n {
            let cell = rec.get(c).unwrap_or("");
            let parsed = if cell.is_empty() {
                0.0
            } else {
                cell.parse().map_err(|_| DataError::Parse {
                    row: r + 1,
                    column: c.to_string(),
                    value: cell.to_string(),
                })?
            };
            if c < n {
                features.push(parsed);
            } else {
                target.push(parsed);
            }
        }
    }
    let mut mask = Vec::new();
    let mut reader = csv::Reader::from_path(&paths.mask)?;
    for rec in reader.records() {
        let rec = rec?;
        mask.extend(rec.iter().map(|c| u8::from(c.trim() == "1")));
    }
    TabularDataset::from_parts(
        meta.name,
        meta.feature_names,
        features,
        mask,
        target,
        meta.column_kinds,
        meta.task,
        meta.range,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    fn schema(target: &str) -> Schema {
        Schema {
            name: "t".into(),
            file: PathBuf::from("x.csv"),
            target: target.into(),
            task: Task::Classification,
            range: NormRange::ZeroOne,
            categorical: vec![],
            drop: vec![],
            positive_label: None,
        }
    }

    #[test]
    fn one_empty_cell_gives_one_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.csv", "a,b,y\n1,2,0\n3,,1\n5,6,1\n");
        let ds = load_csv(&p, &schema("y")).unwrap();
        assert_eq!(ds.rows, 3);
        assert_eq!(ds.mask.iter().filter(|&&m| m == 0).count(), 1);
        assert_eq!(ds.value(1, 1), None);
    }

    #[test]
    fn missing_tokens_and_categoricals() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.csv", "a,c,y\nNA,red,yes\n?,blue,no\n2,red,yes\n");
        let mut s = schema("y");
        s.categorical = vec!["c".into()];
        s.positive_label = Some("yes".into());
        let ds = load_csv(&p, &s).unwrap();
        assert_eq!(ds.mask, vec![0, 1, 0, 1, 1, 1]);
        assert_eq!(ds.column_kinds[1], ColumnKind::Categorical { cardinality: 2 });
        assert_eq!(ds.features[1], 0.0);
        assert_eq!(ds.features[3], 1.0);
        assert_eq!(ds.target, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let dup = write_tmp(&dir, "d.csv", "a,a,y\n1,2,0\n");
        assert!(matches!(load_csv(&dup, &schema("y")), Err(DataError::Schema(_))));
        let ok = write_tmp(&dir, "o.csv", "a,b,y\n1,2,0\n");
        assert!(matches!(load_csv(&ok, &schema("nope")), Err(DataError::Schema(_))));
        let bad = write_tmp(&dir, "b.csv", "a,b,y\n1,2,0\n1,x,1\n");
        match load_csv(&bad, &schema("y")) {
            Err(DataError::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    fn column(values: &[f64]) -> TabularDataset {
        TabularDataset::from_parts(
            "c",
            vec!["x".into()],
            values.to_vec(),
            vec![1; values.len()],
            vec![0.0; values.len()],
            vec![ColumnKind::Numeric],
            Task::Classification,
            NormRange::ZeroOne,
        )
        .unwrap()
    }

    #[test]
    fn min_max_ranges_and_clipping() {
        let ds = column(&[0.0, 5.0, 10.0, 12.0]);
        let train = [0, 1, 2];
        assert_eq!(normalize(&ds, NormRange::ZeroOne, &train).features, vec![0.0, 0.5, 1.0, 1.0]);
        assert_eq!(normalize(&ds, NormRange::MinusOneOne, &train).features, vec![-1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_midpoint() {
        let ds = column(&[3.0, 3.0, 3.0]);
        assert_eq!(normalize(&ds, NormRange::MinusOneOne, &[0, 1, 2]).features, vec![0.0; 3]);
    }

    fn balanced(rows: usize) -> TabularDataset {
        let mut ds = column(&(0..rows).map(|i| i as f64).collect::<Vec<_>>());
        ds.target = (0..rows).map(|i| (i % 2) as f64).collect();
        ds
    }

    #[test]
    fn balanced_split_sizes() {
        let ds = balanced(100);
        let folds = stratified_folds(&ds, 0.3, 10, 9).unwrap();
        assert_eq!(folds.len(), 10);
        let test = &folds[0].test;
        assert_eq!(test.len(), 30);
        assert_eq!(test.iter().filter(|&&r| ds.target[r] == 1.0).count(), 15);
        for f in &folds {
            assert_eq!(&f.test, test);
            let mut all: Vec<usize> = f.train.iter().chain(&f.validation).chain(&f.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..100).collect::<Vec<_>>());
        }
    }

    #[test]
    fn small_stratum_errors() {
        let mut ds = balanced(40);
        ds.target = (0..40).map(|i| if i < 5 { 1.0 } else { 0.0 }).collect();
        let err = stratified_folds(&ds, 0.3, 10, 0).unwrap_err();
        assert!(matches!(err, DataError::Stratification { ref stratum, .. } if stratum == "1"), "{err}");
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = balanced(7);
        ds.features[2] = 0.1 + 0.2;
        ds.mask_cell(4, 0);
        let paths = save_snapshot(&ds, dir.path(), "snap").unwrap();
        let back = load_snapshot(&paths).unwrap();
        assert_eq!(back.features, ds.features);
        assert_eq!(back.mask, ds.mask);
        assert_eq!(back.target, ds.target);
        assert_eq!(back.column_kinds, ds.column_kinds);
    }

    #[test]
    fn schema_toml() {
        let s = Schema::from_toml("name = \"p\"\nfile = \"p.csv\"\ntarget = \"y\"\nrange = \"-1,1\"\n").unwrap();
        assert_eq!(s.range, NormRange::MinusOneOne);
        assert!(Schema::from_toml("name = \"p\"\nfile = \"p.csv\"\ntarget = \"y\"\nbogus = 1\n").is_err());
    }
}
