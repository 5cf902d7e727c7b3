//! The three baseline front-ends on the same partially observed instance.

use attn_impute::baselines::{film, sparsity_normalize, zimc, FilmLayer, SnScaling};
use attn_impute::nn::ParamSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let x = [0.4, 0.0, 0.8, 0.2];
    let m = [1, 0, 1, 1];
    println!("zimc      {:?}", zimc(&x, &m).unwrap());
    for scaling in [SnScaling::InverseMean, SnScaling::CountPlusOne] {
        let out = sparsity_normalize(&x, &m, scaling).unwrap();
        println!("sn {scaling:?}: {:?}", out.values);
    }
    let mut params = ParamSet::new();
    let layer = FilmLayer::new(&mut params, "film", x.len(), &mut ChaCha8Rng::seed_from_u64(1));
    println!("film (untrained, identity on x ⊙ m) {:?}", film(&layer, &params, &x, &m).unwrap());
}
