//! AdamW with decoupled weight decay, and the linear warmup/decay schedule.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First and second moment estimates for a flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamW<T: Scalar> {
    config: AdamWConfig,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(n_params: usize, config: AdamWConfig) -> Self {
        AdamW {
            config,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One update at learning rate `lr`. Decay multiplies each parameter by
    /// `1 - lr * weight_decay` before the moment-based step.
    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let one = T::one();
        let bias1 = one - T::of(c.beta1.powi(self.t));
        let bias2 = one - T::of(c.beta2.powi(self.t));
        let decay = T::of(1.0 - lr * c.weight_decay);
        let lr_t = T::of(lr);
        let eps = T::of(c.epsilon);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *p *= decay;
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr_t * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Learning rate rising linearly from 0 to `peak` over the first
/// `warmup_steps` optimizer steps, then falling linearly to 0 at
/// `total_steps`. Steps are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearWarmup {
    pub peak: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LinearWarmup {
    /// Warmup length is `floor(fraction * total_steps)`.
    pub fn from_fraction(peak: f64, fraction: f64, total_steps: usize) -> Self {
        LinearWarmup {
            peak,
            warmup_steps: (fraction * total_steps as f64).floor() as usize,
            total_steps,
        }
    }

    pub fn lr(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            self.peak * step as f64 / self.warmup_steps as f64
        } else if step >= self.total_steps {
            0.0
        } else {
            let span = (self.total_steps - self.warmup_steps).max(1) as f64;
            self.peak * (self.total_steps - step) as f64 / span
        }
    }
}
