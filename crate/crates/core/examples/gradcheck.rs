//! Reverse-mode gradients of a small expression against central differences.

use attn_impute::gradcheck::{check, DEFAULT_STEP};
use attn_impute::{Tensor, TensorError};

fn main() -> Result<(), TensorError> {
    let w = Tensor::new(&[3, 2], vec![0.2, -0.4, 0.1, 0.7, -0.3, 0.5])?;
    let x = Tensor::new(&[4, 3], (0..12).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let result = check(&[w, x], DEFAULT_STEP, |g, v| {
        let h = g.matmul(v[1], v[0])?;
        let h = g.selu(h);
        let p = g.sigmoid(h);
        g.weighted_bce(p, &[0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0], &[1.0; 8])
    })?;
    for (i, e) in result.rel_errors.iter().enumerate() {
        println!("input {i}: relative error {e:.2e}");
    }
    Ok(())
}
