//! Forward pass of the attention imputation layer on one instance, showing
//! the attention weights of the first head and the opacity gate.

use attn_impute::autodiff::Graph;
use attn_impute::main_layer::{main_forward, MainLayer, MainLayerConfig};
use attn_impute::nn::ParamSet;
use attn_impute::pev::pev_mask_generator;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let x = [Some(0.3), None, Some(0.9), Some(0.1)];
    let config = MainLayerConfig {
        num_heads: 2,
        emb_dim: 8,
        key_dim: 8,
        ..MainLayerConfig::default()
    };
    let mut params = ParamSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let layer = MainLayer::new(&mut params, "main", x.len(), config, &mut rng).expect("valid config");

    let (pev, _) = pev_mask_generator(&x).expect("non-empty");
    let mut g = Graph::new();
    let bound = params.bind_frozen(&mut g);
    let aug = g.constant(pev.to_tensor());
    let trace = layer.forward(&mut g, &bound, aug, 1).expect("forward");
    let weights = g.value(trace.attention);
    println!("head 0 attention (rows sum to 1):");
    for row in weights.data().chunks(x.len()).take(x.len()) {
        let cells: Vec<String> = row.iter().map(|w| format!("{w:.3}")).collect();
        println!("  {}", cells.join("  "));
    }
    println!("gate = {:.3}", g.value(trace.gate).item());

    let h = main_forward(&layer, &params, &x).expect("forward");
    println!("output width {} (n · emb), first values {:?}", h.len(), &h[..4]);
}
