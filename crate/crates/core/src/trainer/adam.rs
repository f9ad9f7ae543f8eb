use super::TrainConfig;
use crate::error::{Error, Result};
use crate::Scalar;

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    /// Number of updates applied so far.
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self { m: vec![T::zero(); len], v: vec![T::zero(); len], step: 0 }
    }
}

/// One bias-corrected Adam step applied in place.
pub fn adam_update<T: Scalar>(param: &mut [T], grad: &[T], state: &mut AdamState<T>, cfg: &TrainConfig) -> Result<()> {
    if param.len() != grad.len() || param.len() != state.m.len() || param.len() != state.v.len() {
        return Err(Error::Shape(format!(
            "adam: param {}, grad {}, state {} lengths differ",
            param.len(),
            grad.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::from_f64_lossy(cfg.beta1);
    let b2 = T::from_f64_lossy(cfg.beta2);
    let one = T::one();
    let c1 = one / (one - b1.powi(t));
    let c2 = one / (one - b2.powi(t));
    let lr = T::from_f64_lossy(cfg.learning_rate);
    let eps = T::from_f64_lossy(cfg.epsilon);
    for (((p, &g), m), v) in param.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m * c1;
        let v_hat = *v * c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64) -> TrainConfig {
        TrainConfig { learning_rate: lr, ..TrainConfig::default() }
    }

    #[test]
    fn zero_gradient_leaves_param_unchanged() {
        let mut p = vec![0.5f64, -1.25, 3.0];
        let mut s = AdamState::new(3);
        adam_update(&mut p, &[0.0; 3], &mut s, &cfg(1e-4)).unwrap();
        assert_eq!(p, vec![0.5, -1.25, 3.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![1.0f64];
        let mut s = AdamState::new(1);
        adam_update(&mut p, &[1.0], &mut s, &cfg(1e-4)).unwrap();
        // m̂ = 1 and v̂ = 1 after bias correction.
        let expected = 1.0 - 1e-4 * (1.0 / (1.0 + 1e-8));
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.9999).abs() < 1e-9);
    }

    /// Scalar reference written directly from the update equations.
    fn reference(mut p: f64, grads: &[f64], c: &TrainConfig) -> f64 {
        let (mut m, mut v) = (0.0, 0.0);
        for (i, g) in grads.iter().enumerate() {
            let t = (i + 1) as i32;
            m = c.beta1 * m + (1.0 - c.beta1) * g;
            v = c.beta2 * v + (1.0 - c.beta2) * g * g;
            let mh = m / (1.0 - c.beta1.powi(t));
            let vh = v / (1.0 - c.beta2.powi(t));
            p -= c.learning_rate * mh / (vh.sqrt() + c.epsilon);
        }
        p
    }

    #[test]
    fn two_steps_match_reference() {
        let c = cfg(1e-2);
        let start = [0.3f64, -2.0, 7.5];
        let g = [0.7f64, -0.05, 3.0];
        let mut p = start.to_vec();
        let mut s = AdamState::new(3);
        for _ in 0..2 {
            adam_update(&mut p, &g, &mut s, &c).unwrap();
        }
        for i in 0..3 {
            let r = reference(start[i], &[g[i], g[i]], &c);
            assert!((p[i] - r).abs() < 1e-14, "{} vs {r}", p[i]);
        }
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let mut p = vec![0.0f32; 2];
        let mut s = AdamState::new(2);
        assert!(adam_update(&mut p, &[1.0], &mut s, &cfg(1e-3)).is_err());
    }
}
