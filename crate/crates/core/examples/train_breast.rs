//! Trains MAIN and ZIMC front-ends jointly with the downstream network on one
//! Breast-Wisconsin fold at 40% MCAR and reports test AUROC.
//!
//! `cargo run --release --example train_breast`

use attn_impute::dataset::{data_root, load_schema_file, normalize, stratified_folds, Task};
use attn_impute::frontend::FrontEndOptions;
use attn_impute::metrics::{auroc_exact, auroc_riemann};
use attn_impute::missingness::inject_mcar;
use attn_impute::train::{train, Model, TrainConfig};
use attn_impute::Method;

fn main() {
    let ds = load_schema_file(&data_root().join("breast.toml")).expect("bundled dataset");
    let ds = inject_mcar(&ds, 0.4, 1).expect("valid rate");
    let split = &stratified_folds(&ds, 0.3, 10, 0).expect("enough rows")[0];
    let ds = normalize(&ds, ds.range, &split.train);
    let labels: Vec<u8> = split.test.iter().map(|&r| ds.target[r] as u8).collect();

    for method in [Method::Zimc, Method::Main] {
        let cfg = TrainConfig::default();
        let mut model = Model::build(method, ds.n_features, &FrontEndOptions::default(), &cfg, Task::Classification)
            .expect("model");
        let report = train(&mut model, &ds, &split.train, &split.validation, &cfg).expect("training");
        let scores = model.predict(&ds, &split.test).expect("prediction");
        println!(
            "{:<5} best epoch {:>3} of {:>3}, val loss {:.4}, test AUROC {:.4} (exact {:.4}), gate {:?}",
            method.label(),
            report.best_epoch,
            report.epochs_run,
            report.best_val_loss,
            auroc_riemann(&scores, &labels).unwrap(),
            auroc_exact(&scores, &labels).unwrap(),
            model.gate(),
        );
    }
}
