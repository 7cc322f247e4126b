//! Adam for the network parameters, AdaGrad for the hypersphere center.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::{AutoencoderParams, GradientSet};

/// Adam with bias correction. Weight decay is L2-coupled: `λ·w` is added to
/// the gradient before the moment updates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    beta1_pow: f64,
    beta2_pow: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn step(&mut self, params: &mut AutoencoderParams, grads: &GradientSet) -> Result<()> {
        if !grads.is_congruent_with(params) {
            return Err(Error::ShapeMismatch {
                context: "adam gradients",
                expected: (params.num_parameters(), 0),
                got: (grads.tensors().iter().map(|t| t.len()).sum(), 0),
            });
        }
        self.step_slices(&mut params.tensors_mut(), &grads.tensors())
    }

    /// One update over parallel lists of parameter and gradient buffers. The
    /// moment buffers are sized on the first call.
    pub fn step_slices(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        let mismatch = |p: usize, g: usize| Error::ShapeMismatch {
            context: "adam step",
            expected: (p, 0),
            got: (g, 0),
        };
        if params.len() != grads.len() {
            return Err(mismatch(params.len(), grads.len()));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(mismatch(p.len(), g.len()));
            }
        }
        if self.t == 0 {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len()
            || self
                .m
                .iter()
                .zip(params.iter())
                .any(|(m, p)| m.len() != p.len())
        {
            return Err(mismatch(self.m.len(), params.len()));
        }

        self.t += 1;
        self.beta1_pow *= self.beta1;
        self.beta2_pow *= self.beta2;
        let (b1, b2) = (self.beta1, self.beta2);
        let bc1 = 1.0 - self.beta1_pow;
        let bc2 = 1.0 - self.beta2_pow;

        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((w, &gi), mi), vi) in p
                .iter_mut()
                .zip(g.iter())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                let grad = gi + self.weight_decay * *w;
                *mi = b1 * *mi + (1.0 - b1) * grad;
                *vi = b2 * *vi + (1.0 - b2) * grad * grad;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
        Ok(())
    }
}

/// AdaGrad with step-count learning-rate decay:
/// `lr_t = lr / (1 + (t - 1) · lr_decay)` for the 1-based step `t`.
#[derive(Debug, Clone)]
pub struct AdaGrad {
    pub lr: f64,
    pub lr_decay: f64,
    pub eps: f64,
    t: u64,
    sum_sq: Vec<f64>,
}

impl AdaGrad {
    pub fn new(dim: usize, lr: f64, lr_decay: f64) -> Self {
        Self {
            lr,
            lr_decay,
            eps: 1e-10,
            t: 0,
            sum_sq: vec![0.0; dim],
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.sum_sq
    }

    /// Learning rate used by the 1-based step `t`.
    pub fn effective_lr(&self, t: u64) -> f64 {
        self.lr / (1.0 + (t.saturating_sub(1)) as f64 * self.lr_decay)
    }

    pub fn step(&mut self, c: &mut [f64], grad: &[f64]) -> Result<()> {
        if c.len() != self.sum_sq.len() || grad.len() != self.sum_sq.len() {
            return Err(Error::ShapeMismatch {
                context: "adagrad step",
                expected: (self.sum_sq.len(), self.sum_sq.len()),
                got: (c.len(), grad.len()),
            });
        }
        self.t += 1;
        let lr = self.effective_lr(self.t);
        for ((ci, &g), acc) in c.iter_mut().zip(grad).zip(&mut self.sum_sq) {
            *acc += g * g;
            *ci -= lr * g / (libm::sqrt(*acc) + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn adam_zero_gradient_without_decay_is_a_no_op() {
        let mut adam = Adam::new(0.001, 0.0);
        let mut w = vec![0.3, -1.2, 5.0];
        for _ in 0..5 {
            adam.step_slices(&mut [&mut w], &[&[0.0; 3]]).unwrap();
        }
        assert_eq!(w, vec![0.3, -1.2, 5.0]);
        assert_eq!(adam.steps(), 5);
    }

    #[test]
    fn adam_first_step_hand_evaluated() {
        // m = 0.1, v = 0.001, m_hat = v_hat = 1, w = -lr / (1 + eps)
        let mut adam = Adam::new(0.001, 0.0);
        let mut w = [0.0];
        adam.step_slices(&mut [&mut w], &[&[1.0]]).unwrap();
        assert!((adam.first_moments()[0][0] - 0.1).abs() < 1e-15);
        assert!((adam.second_moments()[0][0] - 0.001).abs() < 1e-15);
        assert!((w[0] + 0.001).abs() < 1e-9);
    }

    #[test]
    fn adam_weight_decay_moves_weights_at_zero_gradient() {
        let mut adam = Adam::new(0.001, 1e-7);
        let mut w = [1.0];
        adam.step_slices(&mut [&mut w], &[&[0.0]]).unwrap();
        assert!(w[0] < 1.0);
    }

    #[test]
    fn adam_rejects_shape_changes() {
        let mut adam = Adam::new(0.001, 0.0);
        let mut w = [0.0, 0.0];
        assert!(adam.step_slices(&mut [&mut w], &[&[1.0]]).is_err());
        adam.step_slices(&mut [&mut w], &[&[1.0, 1.0]]).unwrap();
        let mut w3 = [0.0; 3];
        assert!(adam.step_slices(&mut [&mut w3], &[&[1.0; 3]]).is_err());
    }

    #[test]
    fn adagrad_first_and_second_step() {
        let mut ada = AdaGrad::new(1, 1.0, 0.1);
        let mut c = [0.0];
        ada.step(&mut c, &[2.0]).unwrap();
        assert!((c[0] + 2.0 / (2.0 + 1e-10)).abs() < 1e-15);
        assert!((c[0] + 1.0).abs() < 1e-9);
        let before = c[0];
        ada.step(&mut c, &[2.0]).unwrap();
        let expected = (1.0 / 1.1) * 2.0 / 8f64.sqrt();
        assert!(((before - c[0]) - expected).abs() < 1e-9);
        assert!((expected - 0.643).abs() < 5e-4);
    }

    #[test]
    fn adagrad_zero_gradient_leaves_state() {
        let mut ada = AdaGrad::new(2, 1.0, 0.1);
        let mut c = [0.5, -0.5];
        ada.step(&mut c, &[0.0, 0.0]).unwrap();
        assert_eq!(c, [0.5, -0.5]);
        assert_eq!(ada.accumulator(), &[0.0, 0.0]);
    }

    #[test]
    fn adagrad_rejects_length_mismatch() {
        let mut ada = AdaGrad::new(2, 1.0, 0.1);
        assert!(ada.step(&mut [0.0; 3], &[0.0; 3]).is_err());
        assert!(ada.step(&mut [0.0; 2], &[0.0; 1]).is_err());
    }

    /// Cauchy-Schwarz bound on |m_hat| / sqrt(v_hat) at the 1-based step `t`.
    fn adam_ratio_bound(t: i32, b1: f64, b2: f64) -> f64 {
        let geo: f64 = (0..t).map(|k| (b1 * b1 / b2).powi(k)).sum();
        (1.0 - b1) / (1.0 - b1.powi(t)) * geo.sqrt() * ((1.0 - b2.powi(t)) / (1.0 - b2)).sqrt()
    }

    #[test]
    fn adam_step_can_exceed_lr_after_a_long_quiet_stretch() {
        let lr = 0.001;
        let mut adam = Adam::new(lr, 0.0);
        let mut w = [0.0];
        for _ in 0..1000 {
            adam.step_slices(&mut [&mut w], &[&[0.0]]).unwrap();
        }
        adam.step_slices(&mut [&mut w], &[&[1000.0]]).unwrap();
        assert!(w[0].abs() > 2.0 * lr);
        assert!(w[0].abs() <= lr * 0.1 / 0.001f64.sqrt());
    }

    proptest! {
        #[test]
        fn adam_constant_gradient_moves_by_lr(g in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3], steps in 1usize..50) {
            let lr = 0.001;
            let mut adam = Adam::new(lr, 0.0);
            let mut w = [0.0];
            for _ in 0..steps {
                let before = w[0];
                adam.step_slices(&mut [&mut w], &[&[g]]).unwrap();
                prop_assert!((w[0] - before).abs() <= lr * 1.01);
            }
        }

        #[test]
        fn adam_step_within_moment_bound(grads in proptest::collection::vec(-1e3f64..1e3, 1..120)) {
            let lr = 0.001;
            let mut adam = Adam::new(lr, 0.0);
            let mut w = [0.0];
            for (t, g) in grads.into_iter().enumerate() {
                let before = w[0];
                adam.step_slices(&mut [&mut w], &[&[g]]).unwrap();
                let bound = lr * adam_ratio_bound(t as i32 + 1, 0.9, 0.999);
                prop_assert!((w[0] - before).abs() <= bound * (1.0 + 1e-9));
            }
        }

        #[test]
        fn adagrad_accumulator_monotone_and_lr_non_increasing(
            grads in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 1..30),
            decay in 0.0f64..2.0,
        ) {
            let mut ada = AdaGrad::new(3, 1.0, decay);
            let mut c = [0.0; 3];
            let mut prev = ada.accumulator().to_vec();
            for (t, g) in grads.iter().enumerate() {
                ada.step(&mut c, g).unwrap();
                for (a, p) in ada.accumulator().iter().zip(&prev) {
                    prop_assert!(a >= p);
                }
                prev = ada.accumulator().to_vec();
                let t = t as u64 + 1;
                prop_assert!(ada.effective_lr(t + 1) <= ada.effective_lr(t));
            }
        }
    }
}
