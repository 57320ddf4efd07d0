//! Adam with a linear learning-rate warmup.

use alloc::vec::Vec;

use crate::autograd::{Gradients, ParamStore};
use crate::math;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Steps over which the learning rate ramps linearly from 0 to `lr`.
    pub warmup_steps: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            warmup_steps: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Option<Tensor>>,
    v: Vec<Option<Tensor>>,
    step: usize,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    /// Learning rate applied at 1-based step `t`.
    pub fn lr_at(&self, t: usize) -> f64 {
        let c = &self.config;
        if c.warmup_steps == 0 || t >= c.warmup_steps {
            c.lr
        } else {
            c.lr * t as f64 / c.warmup_steps as f64
        }
    }

    /// Applies one update to every trainable parameter that has a gradient.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let t = self.step;
        let lr = self.lr_at(t);
        let AdamConfig {
            beta1, beta2, eps, ..
        } = self.config;
        let bc1 = 1.0 - math::powi(beta1, t as i32);
        let bc2 = 1.0 - math::powi(beta2, t as i32);
        if self.m.len() < params.len() {
            self.m.resize(params.len(), None);
            self.v.resize(params.len(), None);
        }
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            if !params.param(id).trainable {
                continue;
            }
            let Some(g) = grads.get(id) else { continue };
            let i = id.index();
            let shape = g.shape().to_vec();
            let m = self.m[i].get_or_insert_with(|| Tensor::zeros(&shape));
            let v = self.v[i].get_or_insert_with(|| Tensor::zeros(&shape));
            let w = params.get_mut(id).data_mut();
            for (((w, &g), m), v) in w
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let mh = *m / bc1;
                let vh = *v / bc2;
                *w -= lr * mh / (math::sqrt(vh) + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Graph;

    #[test]
    fn warmup_is_linear() {
        let a = Adam::new(AdamConfig {
            lr: 1.0,
            warmup_steps: 4,
            ..AdamConfig::default()
        });
        assert_eq!(a.lr_at(1), 0.25);
        assert_eq!(a.lr_at(4), 1.0);
        assert_eq!(a.lr_at(100), 1.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let x = store.add("x", Tensor::from_vec(&[2], alloc::vec![3.0, -2.0]));
        let mut opt = Adam::new(AdamConfig {
            lr: 0.1,
            warmup_steps: 0,
            ..AdamConfig::default()
        });
        for _ in 0..500 {
            let grads = {
                let mut g = Graph::inference(&store);
                let v = g.param(x);
                let l = g.mse(v, &[1.0, 1.0]);
                g.backward(l)
            };
            opt.step(&mut store, &grads);
        }
        let v = store.get(x).data();
        assert!((v[0] - 1.0).abs() < 1e-2 && (v[1] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn zero_lr_leaves_params() {
        let mut store = ParamStore::new();
        let x = store.add("x", Tensor::from_vec(&[1], alloc::vec![3.0]));
        let before = store.clone();
        let mut opt = Adam::new(AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        });
        let grads = {
            let mut g = Graph::inference(&store);
            let v = g.param(x);
            let l = g.mse(v, &[0.0]);
            g.backward(l)
        };
        opt.step(&mut store, &grads);
        assert_eq!(store, before);
    }
}
