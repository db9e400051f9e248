//! Adam with bias correction, shared by pre-training and adaptation.

#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Advance the moments with `grad` and return the bias-corrected update
    /// direction (to be scaled by the learning rate and subtracted).
    pub fn direction(&mut self, grad: &[f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.m.len(), "gradient length changed");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let mut out = Vec::with_capacity(grad.len());
        for ((m, v), &g) in self.m.iter_mut().zip(self.v.iter_mut()).zip(grad) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            out.push(mhat / (vhat.sqrt() + self.eps));
        }
        out
    }

    /// In-place `params -= lr · direction(grad)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        let dir = self.direction(grad);
        for (p, d) in params.iter_mut().zip(dir) {
            *p -= lr * d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_sign_of_gradient() {
        let mut adam = Adam::new(3);
        let d = adam.direction(&[2.0, -0.5, 0.0]);
        assert!((d[0] - 1.0).abs() < 1e-6);
        assert!((d[1] + 1.0).abs() < 1e-6);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn zero_lr_leaves_params() {
        let mut adam = Adam::new(2);
        let mut p = vec![1.0, 2.0];
        adam.step(&mut p, &[3.0, 4.0], 0.0);
        assert_eq!(p, vec![1.0, 2.0]);
    }
}
