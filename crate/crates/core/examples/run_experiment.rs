//! Runs the smoke config through the library and prints the results table.
//!
//! `cargo run --release --example run_experiment [config.toml]`

use std::path::PathBuf;

use attn_impute::experiment::{run_experiment, ExperimentConfig};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml"));
    let cfg = ExperimentConfig::load(&path).expect("valid config");
    let table = run_experiment(&cfg, 1).expect("experiment");
    print!("{}", table.render_table().expect("non-empty"));
    for run in table.runs.iter().take(4) {
        println!("{} {} seed {} fold {}: {:.4}", run.method, run.rate, run.seed, run.fold, run.value.unwrap_or(f64::NAN));
    }
}
