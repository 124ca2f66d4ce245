use crate::ParamSet;

/// Adam with bias-corrected moments. Parameters are visited in set order,
/// so a step is deterministic given the accumulated gradients.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            beta1,
            beta2,
            epsilon,
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients currently accumulated in `params`.
    /// Gradients are left in place; call [`ParamSet::zero_grad`] before the next pass.
    pub fn step(&mut self, params: &mut ParamSet, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for p in params.iter_mut() {
            let grads = p.grad.data();
            let m = p.first_moment.data_mut();
            for (mi, g) in m.iter_mut().zip(grads) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
            }
            let v = p.second_moment.data_mut();
            for (vi, g) in v.iter_mut().zip(grads) {
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
            }
            let (m, v) = (p.first_moment.data(), p.second_moment.data());
            for ((theta, mi), vi) in p.value.data_mut().iter_mut().zip(m).zip(v) {
                let m_hat = mi / bias1;
                let v_hat = vi / bias2;
                *theta -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix;

    fn scalar_set(value: f64) -> ParamSet {
        let mut set = ParamSet::new();
        set.insert("theta", Matrix::scalar(value)).unwrap();
        set
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut set = scalar_set(0.7);
        let mut adam = Adam::default();
        for _ in 0..5 {
            adam.step(&mut set, 0.1);
        }
        assert_eq!(set.iter().next().unwrap().value.item(), 0.7);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g², so the step is lr·g/(|g|+ε) ≈ lr.
        let mut set = scalar_set(1.0);
        set.iter_mut().next().unwrap().grad = Matrix::scalar(1.0);
        let mut adam = Adam::default();
        adam.step(&mut set, 0.1);
        let theta = set.iter().next().unwrap().value.item();
        assert!((theta - 0.9).abs() < 1e-7, "{theta}");
    }

    #[test]
    fn repeated_gradients_move_monotonically() {
        let mut set = scalar_set(0.0);
        let mut adam = Adam::default();
        let mut last = 0.0;
        for _ in 0..20 {
            set.iter_mut().next().unwrap().grad = Matrix::scalar(-0.3);
            adam.step(&mut set, 0.01);
            let now = set.iter().next().unwrap().value.item();
            assert!(now > last);
            last = now;
        }
    }
}
