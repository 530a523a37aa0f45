use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamStore};
use super::tensor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments, one moment pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, store: &ParamStore<T>) -> Self {
        let zeros = || store.iter().map(|p| vec![T::zero(); p.len()]).collect();
        Self {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn update(&mut self, store: &mut ParamStore<T>, grads: &Grads<T>) {
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (lr, eps) = (T::of(c.lr), T::of(c.eps));
        let (bc1, bc2) = (T::of(bc1), T::of(bc2));
        for (((p, g), m), v) in store
            .iter_mut()
            .zip(&grads.data)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((w, &g), m), v) in p.value.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mh = *m / bc1;
                let vh = *v / bc2;
                *w -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut s = ParamStore::<f64>::new();
        let id = s.add("w", 1, 3, vec![1.0, 1.0, 1.0]);
        let mut g = s.grads();
        g.get_mut(id).copy_from_slice(&[0.5, -3.0, 0.0]);
        let mut adam = Adam::new(AdamConfig::default(), &s);
        adam.update(&mut s, &g);
        let w = s.value(id);
        assert!((w[0] - (1.0 - 2e-4)).abs() < 1e-10);
        assert!((w[1] - (1.0 + 2e-4)).abs() < 1e-10);
        assert_eq!(w[2], 1.0);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut s = ParamStore::<f32>::new();
        s.add("w", 2, 2, vec![0.1, -0.2, 0.3, 0.4]);
        let before = s.clone();
        let g = s.grads();
        let mut adam = Adam::new(AdamConfig::default(), &s);
        for _ in 0..5 {
            adam.update(&mut s, &g);
        }
        assert_eq!(s, before);
    }
}
