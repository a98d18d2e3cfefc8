use alloc::vec::Vec;

use super::params::{Gradients, Params};
use crate::math::sqrt;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &Params) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|(_, _, t)| Matrix::zeros(t.rows(), t.cols()))
                .collect()
        };
        Adam {
            config,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut Params, grads: &Gradients) {
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - libm::pow(beta1, self.step as f64);
        let c2 = 1.0 - libm::pow(beta2, self.step as f64);
        for (id, p) in params.tensors_mut().iter_mut().enumerate() {
            let g = grads.get(id).data();
            let m = self.m[id].data_mut();
            let v = self.v[id].data_mut();
            for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g).zip(m).zip(v) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *p -= lr * mhat / (sqrt(vhat) + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(x: f64) -> Params {
        let mut p = Params::new();
        p.add("theta", Matrix::scalar(x));
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = scalar_params(0.3);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        let g = p.zeros_like();
        adam.step(&mut p, &g);
        assert_eq!(p.get(0).item(), 0.3);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m = 0.1, v = 0.001; bias correction gives m̂ = v̂ = 1
        let mut p = scalar_params(0.0);
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(cfg, &p);
        let mut g = p.zeros_like();
        g.get_mut(0).set(0, 0, 1.0);
        adam.step(&mut p, &g);
        let expected = -cfg.lr / (1.0 + cfg.eps);
        assert!((p.get(0).item() - expected).abs() < 1e-18);
    }
}
