//! Stratified hold-out plus 10-fold split with fold-train normalization.

use attn_impute::dataset::{data_root, fit_norm, load_schema_file, stratified_folds};

fn main() {
    let ds = load_schema_file(&data_root().join("pima.toml")).expect("bundled dataset");
    let folds = stratified_folds(&ds, 0.3, 10, 0).expect("enough rows");
    let rate = |rows: &[usize]| rows.iter().filter(|&&r| ds.target[r] == 1.0).count() as f64 / rows.len() as f64;
    println!("test {} rows, positive rate {:.3}", folds[0].test.len(), rate(&folds[0].test));
    for f in folds.iter().take(3) {
        println!(
            "fold {}: train {} ({:.3}), validation {} ({:.3})",
            f.fold,
            f.train.len(),
            rate(&f.train),
            f.validation.len(),
            rate(&f.validation)
        );
    }
    let norm = fit_norm(&ds, &folds[0].train, ds.range);
    println!("{:?}", &norm.columns[..2]);
}
