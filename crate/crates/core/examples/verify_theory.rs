//! Monte-Carlo check of the layer-1 expectation bounds on one random network,
//! and the covariance debiasing transform.

use attn_impute::theory::{check_theorem1, check_theorem2, covariance_debias, estimate, random_spec, GeneratorConfig, MaskGen, Nonlinearity};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = random_spec(&mut rng, &GeneratorConfig::default(), Nonlinearity::Relu);
    println!("widths {:?}", spec.widths);

    for rate in [0.2, 0.5, 0.8] {
        let r = check_theorem1(&spec, rate, 10_000, 1);
        let low = r.min_layer1();
        println!("MCAR {rate}: min E[h1] {:.4} ± {:.4} vs bound {:.4} -> {}", low.mean, low.stderr, r.rhs, r.pass());
    }
    let mar = MaskGen::Mar { rate: 0.4, slope: 2.0 };
    let r = check_theorem2(&spec, mar, 10_000, 2);
    println!(
        "MAR: T1 {:.4}, mean cov {:+.4}, stated bound {} / Jensen form {}",
        r.t1,
        r.cov_mean,
        r.pass(),
        r.pass_exact()
    );

    let est = estimate(&spec, mar, 10_000, 3, None);
    let cov: Vec<f64> = est.cov.iter().map(|c| c.mean).collect();
    let debiased = covariance_debias(&est.xm_mean, &cov).expect("same width");
    println!("E[x⊙m] {:.3?}\ndebiased {:.3?}", est.xm_mean, debiased);
}
