//! Adam optimizer with bias correction.

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }
}

/// One update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, learning_rate: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_the_learning_rate() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.5, -3.0], &mut s, 1e-3);
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((p[1] - (-2.0 + 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_parameters_alone() {
        let mut p = vec![0.25; 4];
        let mut s = AdamState::new(4);
        adam_step(&mut p, &[0.0; 4], &mut s, 0.1);
        assert_eq!(p, vec![0.25; 4]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn two_steps_differ_from_one_doubled_step() {
        let g = [0.3, -0.7, 1.1];
        let mut a = vec![0.0; 3];
        let mut sa = AdamState::new(3);
        adam_step(&mut a, &g, &mut sa, 0.01);
        adam_step(&mut a, &[-0.2, 0.9, 0.1], &mut sa, 0.01);
        let mut b = vec![0.0; 3];
        let mut sb = AdamState::new(3);
        adam_step(&mut b, &g, &mut sb, 0.02);
        assert_ne!(a, b);
    }
}
