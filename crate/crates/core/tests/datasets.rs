mod common;

use std::collections::BTreeSet;

use attn_impute::dataset::{
    load_schema_file, load_snapshot, normalize, save_snapshot, stratified_folds, data_root, ColumnKind, NormRange,
};
use attn_impute::missingness::inject_mcar;

fn positive_rate(target: &[f64], rows: &[usize]) -> f64 {
    rows.iter().filter(|&&r| target[r] == 1.0).count() as f64 / rows.len() as f64
}

#[test]
fn bundled_tables_have_expected_shapes() {
    let breast = common::breast();
    assert_eq!((breast.rows, breast.n_features), (569, 30));
    assert_eq!(breast.labels().iter().filter(|&&l| l == 1).count(), 212);
    assert_eq!(breast.missing_rate(), 0.0);

    let pima = load_schema_file(&data_root().join("pima.toml")).unwrap();
    assert_eq!((pima.rows, pima.n_features), (768, 8));
    assert_eq!(pima.range, NormRange::MinusOneOne);
    assert!(pima.missing_rate() > 0.0);

    let mammo = load_schema_file(&data_root().join("mammographic.toml")).unwrap();
    assert_eq!((mammo.rows, mammo.n_features), (830, 5));
    assert_eq!(mammo.missing_rate(), 0.0);
    let categorical = mammo
        .column_kinds
        .iter()
        .filter(|k| matches!(k, ColumnKind::Categorical { .. }))
        .count();
    assert_eq!(categorical, 2);
}

#[test]
fn folds_preserve_class_proportions_and_partition_rows() {
    let ds = common::breast();
    let overall = positive_rate(&ds.target, &(0..ds.rows).collect::<Vec<_>>());
    for seed in 0..3 {
        let folds = stratified_folds(&ds, 0.3, 10, seed).unwrap();
        assert_eq!(folds.len(), 10);
        let test: BTreeSet<usize> = folds[0].test.iter().copied().collect();
        assert!((test.len() as f64 - 0.3 * ds.rows as f64).abs() <= 2.0);
        let mut validation_union = BTreeSet::new();
        for f in &folds {
            assert_eq!(f.test, folds[0].test);
            for part in [&f.train, &f.validation, &f.test] {
                assert!((positive_rate(&ds.target, part) - overall).abs() <= 0.05);
            }
            let all: BTreeSet<usize> = f.train.iter().chain(&f.validation).chain(&f.test).copied().collect();
            assert_eq!(all.len(), ds.rows);
            assert!(f.train.iter().chain(&f.validation).all(|r| !test.contains(r)));
            assert!(validation_union.is_disjoint(&f.validation.iter().copied().collect()));
            validation_union.extend(f.validation.iter().copied());
        }
        assert_eq!(validation_union.len() + test.len(), ds.rows);
    }
}

#[test]
fn normalisation_uses_training_rows_only() {
    let ds = common::breast();
    let folds = stratified_folds(&ds, 0.3, 10, 0).unwrap();
    let train = &folds[0].train;
    let norm = normalize(&ds, NormRange::ZeroOne, train);
    for c in 0..ds.n_features {
        let col: Vec<f64> = train.iter().map(|&r| norm.features[r * ds.n_features + c]).collect();
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12, "column {c}: [{lo}, {hi}]");
    }
    assert!(norm.features.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn snapshot_round_trip_on_real_data() {
    let dir = tempfile::tempdir().unwrap();
    for schema in ["breast.toml", "pima.toml", "mammographic.toml"] {
        let ds = load_schema_file(&data_root().join(schema)).unwrap();
        let masked = inject_mcar(&ds, 0.3, 5).unwrap();
        let masked = if ds.missing_rate() > 0.0 { ds.clone() } else { masked };
        let paths = save_snapshot(&masked, dir.path(), &ds.name).unwrap();
        let back = load_snapshot(&paths).unwrap();
        assert_eq!(back.mask, masked.mask, "{schema}");
        assert_eq!(back.features, masked.features, "{schema}");
        assert_eq!(back.target, masked.target, "{schema}");
        assert_eq!(back.feature_names, masked.feature_names, "{schema}");
    }
}
