//! Adam with bias correction.

/// Moment accumulators for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: vec![0.0; len],
            second: vec![0.0; len],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update `params -= lr · m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(params.len(), self.first.len(), "parameter length changed");
        assert_eq!(grad.len(), self.first.len(), "gradient length mismatch");
        self.steps += 1;
        let c1 = 1.0 - self.beta1.powf(self.steps as f64);
        let c2 = 1.0 - self.beta2.powf(self.steps as f64);
        for (k, p) in params.iter_mut().enumerate() {
            let g = grad[k];
            self.first[k] = self.beta1 * self.first[k] + (1.0 - self.beta1) * g;
            self.second[k] = self.beta2 * self.second[k] + (1.0 - self.beta2) * g * g;
            *p -= lr * (self.first[k] / c1) / ((self.second[k] / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        // with bias correction the first step is lr·sign(g) up to ε
        let mut adam = AdamState::new(3);
        let mut p = vec![0.0; 3];
        adam.step(&mut p, &[2.0, -0.5, 0.0], 0.1);
        assert!((p[0] + 0.1).abs() < 1e-8);
        assert!((p[1] - 0.1).abs() < 1e-8);
        assert_eq!(p[2], 0.0);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut adam = AdamState::new(2);
        let mut p = vec![3.0, -2.0];
        for _ in 0..5000 {
            let g = [2.0 * (p[0] - 1.0), 20.0 * p[1]];
            adam.step(&mut p, &g, 0.01);
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && p[1].abs() < 1e-3);
    }
}
