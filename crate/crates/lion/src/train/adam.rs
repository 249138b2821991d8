//! Adam with decoupled weight decay.

/// Optimizer hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay, applied directly to the parameters.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

/// First/second moment buffers, one pair per parameter block.
#[derive(Debug, Clone)]
pub struct AdamState {
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(block_sizes: &[usize]) -> Self {
        AdamState {
            step: 0,
            m: block_sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: block_sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over all blocks: bias-corrected moment estimates, then the
    /// decoupled decay term.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], cfg: &AdamConfig) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (bi, (block, grad)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[bi];
            let v = &mut self.v[bi];
            for i in 0..block.len() {
                let g = grad[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                block[i] -= cfg.lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * block[i]);
            }
        }
    }
}
