//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates forward passes, so it is independent of
//! the adjoints implemented in [`crate::autodiff`].

use crate::autodiff::{Graph, Var};
use crate::tensor::{Tensor, TensorError};

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub analytic: Vec<Vec<f64>>,
    pub numeric: Vec<Vec<f64>>,
    /// Norm-wise relative error per input.
    pub rel_errors: Vec<f64>,
}

impl GradCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.rel_errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Gradient norms below this are indistinguishable from difference noise.
pub const NORM_FLOOR: f64 = 1e-5;

/// `||a - b|| / max(||a||, ||b||, NORM_FLOOR)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(NORM_FLOOR)
}

/// [`Graph::kink_distance`] of `f` evaluated at `inputs`. Central differences
/// are only meaningful when this exceeds the step.
pub fn kink_distance<F, E>(inputs: &[Tensor], f: F) -> Result<f64, E>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, E>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    f(&mut g, &vars)?;
    Ok(g.kink_distance())
}

/// Compares `backward` against central differences for a scalar function of
/// `inputs`. `f` must build the function on the graph it is handed from the
/// leaves it is handed.
pub fn check<F, E>(inputs: &[Tensor], step: f64, f: F) -> Result<GradCheck, E>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, E>,
    E: From<TensorError>,
{
    let eval = |tensors: &[Tensor]| -> Result<f64, E> {
        let mut g = Graph::new();
        let vars: Vec<Var> = tensors.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).item())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .map(|&v| g.grad(v).expect("param has grad").to_vec())
        .collect();

    let mut numeric = Vec::with_capacity(inputs.len());
    let mut perturbed = inputs.to_vec();
    for k in 0..inputs.len() {
        let mut grad = Vec::with_capacity(inputs[k].numel());
        for j in 0..inputs[k].numel() {
            let orig = inputs[k].data()[j];
            perturbed[k].data_mut()[j] = orig + step;
            let plus = eval(&perturbed)?;
            perturbed[k].data_mut()[j] = orig - step;
            let minus = eval(&perturbed)?;
            perturbed[k].data_mut()[j] = orig;
            grad.push((plus - minus) / (2.0 * step));
        }
        numeric.push(grad);
    }
    let rel_errors = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| relative_error(a, n))
        .collect();
    Ok(GradCheck {
        analytic,
        numeric,
        rel_errors,
    })
}
