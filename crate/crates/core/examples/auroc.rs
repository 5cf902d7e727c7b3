//! Grid-based Riemann AUROC against the exact trapezoidal value.

use attn_impute::metrics::{aggregate, auroc_exact, auroc_riemann, roc_curve};

fn main() {
    let scores = [0.91, 0.85, 0.77, 0.64, 0.62, 0.55, 0.41, 0.33, 0.20, 0.05];
    let labels = [1, 1, 0, 1, 1, 0, 0, 1, 0, 0];
    let curve = roc_curve(&scores, &labels).unwrap();
    for t in [0, 50, 100, 150, 199] {
        println!("t={:.3} fpr={:.2} tpr={:.2}", curve.thresholds[t], curve.fpr[t], curve.tpr[t]);
    }
    println!("riemann {:.4}", auroc_riemann(&scores, &labels).unwrap());
    println!("exact   {:.4}", auroc_exact(&scores, &labels).unwrap());
    let (mean, std) = aggregate(&[0.97, 0.98, 0.965, 0.975, 0.98]).unwrap();
    println!("five runs: {mean:.4} ± {std:.4}");
}
