use crate::Scalar;

/// Numerically stable softmax of one logit vector.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().cloned().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|v| v / sum).collect()
}

/// Mean categorical cross-entropy of row-major probabilities against integer labels.
pub fn cross_entropy<T: Scalar>(probs: &[T], labels: &[usize], classes: usize) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[i * classes + y].to_f64_lossy().max(f64::MIN_POSITIVE).ln())
        .sum();
    total / labels.len() as f64
}

/// Gradient of mean cross-entropy with respect to the logits feeding a softmax.
pub fn softmax_cross_entropy_grad<T: Scalar>(probs: &[T], labels: &[usize], classes: usize) -> Vec<T> {
    let scale = T::from_f64_lossy(1.0 / labels.len() as f64);
    let mut grad: Vec<T> = probs.iter().map(|&p| p * scale).collect();
    for (i, &y) in labels.iter().enumerate() {
        grad[i * classes + y] -= scale;
    }
    grad
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_prediction_costs_ln_c() {
        for c in [2usize, 3, 10, 16] {
            let probs = vec![1.0f64 / c as f64; c];
            assert!((cross_entropy(&probs, &[0], c) - (c as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_prediction_costs_nearly_nothing() {
        let probs = softmax(&[40.0f64, 0.0, 0.0]);
        assert!(cross_entropy(&probs, &[0], 3) < 1e-12);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(logits in proptest::collection::vec(-20.0f32..20.0, 1..20)) {
            let p = softmax(&logits);
            let sum: f64 = p.iter().map(|&v| v as f64).sum();
            prop_assert!((sum - 1.0).abs() < 1e-6);
            prop_assert!(p.iter().all(|&v| v > 0.0));
        }

        #[test]
        fn softmax_f64_strictly_positive(logits in proptest::collection::vec(-30.0f64..30.0, 1..20)) {
            let p = softmax(&logits);
            prop_assert!(p.iter().all(|&v| v > 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
