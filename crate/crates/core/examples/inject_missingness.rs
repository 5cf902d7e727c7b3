//! MCAR, MAR and mixed injection on Breast-Wisconsin, plus Pima pollution
//! from its intrinsic missing rate.

use attn_impute::dataset::{data_root, load_schema_file};
use attn_impute::missingness::{apply, mask_covariance, pollute_to_rate, Mechanism, MissingnessSpec};

fn main() {
    let breast = load_schema_file(&data_root().join("breast.toml")).expect("bundled dataset");
    for mechanism in [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mixture] {
        let spec = MissingnessSpec {
            mechanism,
            ..MissingnessSpec::mcar(0.4, 7)
        };
        let out = apply(&breast, &spec).expect("valid spec");
        let (cov, se) = mask_covariance(&breast, &out, 0);
        println!(
            "{mechanism:?}: missing {:.4}, cov(x0, missing0) = {cov:+.3} ± {se:.3}",
            out.missing_rate()
        );
    }

    let pima = load_schema_file(&data_root().join("pima.toml")).expect("bundled dataset");
    println!("pima intrinsic {:.4}", pima.missing_rate());
    for target in [0.2, 0.4, 0.6, 0.8] {
        let out = pollute_to_rate(&pima, target, 3).expect("target above intrinsic");
        println!("  -> {target}: {:.4}", out.missing_rate());
    }
}
