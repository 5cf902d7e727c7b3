mod common;

use common::{gradient_suite, selu_derivative_error, GRAD_TOLERANCE};

#[test]
fn analytic_gradients_match_finite_differences() {
    let worst = gradient_suite(0..10);
    let failing: Vec<_> = worst.iter().filter(|(_, e)| !(*e < GRAD_TOLERANCE)).collect();
    for (name, err) in &worst {
        println!("{name:<40} {err:.2e}");
    }
    assert!(failing.is_empty(), "gradient mismatch: {failing:?}");
    assert!(worst.iter().any(|(n, _)| n == "main.gate_logit"), "gate logit not covered");
}

#[test]
fn selu_derivative() {
    assert!(selu_derivative_error() < 1e-6);
}
