/// Binary cross-entropy summed over examples:
/// `−Σ [r·ln r̂ + (1−r)·ln(1−r̂)]`. Probabilities must lie in (0, 1).
pub fn cross_entropy_loss(predictions: &[f64], labels: &[f64]) -> f64 {
    debug_assert_eq!(predictions.len(), labels.len());
    predictions
        .iter()
        .zip(labels)
        .map(|(&p, &r)| -(r * p.ln() + (1.0 - r) * (-p).ln_1p()))
        .sum()
}

/// Cross-entropy of `sigmoid(z)` against `r`, evaluated as
/// `max(z, 0) − r·z + ln(1 + e^{−|z|})` so it stays finite for any `z`.
pub fn logit_cross_entropy(z: f64, r: f64) -> f64 {
    z.max(0.0) - r * z + (-z.abs()).exp().ln_1p()
}

/// Joint objective: both domains' losses plus the sparsity penalty.
pub fn joint_loss(loss_target: f64, loss_source: f64, penalty: f64) -> f64 {
    loss_target + loss_source + penalty
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sigmoid;

    #[test]
    fn maximal_uncertainty() {
        let n = 7;
        let l = cross_entropy_loss(&vec![0.5; n], &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert!((l - n as f64 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_limit() {
        assert!(cross_entropy_loss(&[1.0 - 1e-15], &[1.0]) < 1e-14);
        assert!(cross_entropy_loss(&[1e-15], &[0.0]) < 1e-14);
        assert!(logit_cross_entropy(800.0, 1.0) == 0.0);
    }

    #[test]
    fn point_eight_positive() {
        // −ln 0.8
        assert!((cross_entropy_loss(&[0.8], &[1.0]) - 0.22314355).abs() < 1e-8);
    }

    #[test]
    fn logit_form_agrees() {
        for &z in &[-10.0, -2.5, -0.1, 0.0, 0.3, 4.0, 10.0] {
            for &r in &[0.0, 1.0] {
                let direct = cross_entropy_loss(&[sigmoid(z)], &[r]);
                assert!((logit_cross_entropy(z, r) - direct).abs() < 1e-9 * (1.0 + direct));
            }
        }
        assert!(logit_cross_entropy(-800.0, 1.0).is_finite());
    }

    #[test]
    fn joint_examples() {
        assert_eq!(joint_loss(1.5, 2.5, 0.0), 4.0);
        assert_eq!(joint_loss(0.0, 0.0, 0.0), 0.0);
        assert!((joint_loss(1.5, 2.5, 0.6) - 4.6).abs() < 1e-15);
    }
}
