use crate::error::{Error, Result};

/// Adam with bias correction; the crate-wide default optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        param_len: usize,
    ) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidInput(format!(
                "learning rate must be > 0, got {learning_rate}"
            )));
        }
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in [0,1), got {b}"
                )));
            }
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        Ok(AdamState {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            first_moment: vec![0.0; param_len],
            second_moment: vec![0.0; param_len],
        })
    }

    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        debug_assert_eq!(params.len(), self.first_moment.len());
        self.step += 1;
        let b1 = self.beta1;
        let b2 = self.beta2;
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.first_moment[i] = b1 * self.first_moment[i] + (1.0 - b1) * g;
            self.second_moment[i] = b2 * self.second_moment[i] + (1.0 - b2) * g * g;
            let m_hat = self.first_moment[i] / bc1;
            let v_hat = self.second_moment[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Classical momentum update: Δw(n) = α·Δw(n−1) − η·∇L, w += Δw.
/// Provided as a fidelity mode for the plain momentum learning rule.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub learning_rate: f64,
    pub momentum: f64,
    pub velocity: Vec<f64>,
}

impl MomentumState {
    pub fn new(learning_rate: f64, momentum: f64, param_len: usize) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidInput(format!(
                "learning rate must be > 0, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidInput(format!(
                "momentum must lie in [0,1), got {momentum}"
            )));
        }
        Ok(MomentumState {
            learning_rate,
            momentum,
            velocity: vec![0.0; param_len],
        })
    }

    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        for i in 0..params.len() {
            self.velocity[i] = self.momentum * self.velocity[i] - self.learning_rate * grads[i];
            params[i] += self.velocity[i];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Adam(AdamState),
    Momentum(MomentumState),
}

impl Optimizer {
    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) {
        match self {
            Optimizer::Adam(s) => s.apply(params, grads),
            Optimizer::Momentum(s) => s.apply(params, grads),
        }
    }
}
