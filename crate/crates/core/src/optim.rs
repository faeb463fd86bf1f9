//! Adam with global-norm gradient clipping.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::tape::{first_non_finite, Gradients};
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;
pub const CLIP_NORM: f64 = 5.0;

/// Learning rate of the online loop's first turn.
pub const DEFAULT_LR: f64 = 0.001;
/// Learning rate preset tuned for one-shot updates.
pub const ONE_SHOT_LR: f64 = 0.005;

/// Moment estimates for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &[Tensor], lr: f64) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
            lr,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPSILON,
        }
    }

    /// One Adam step on `params`, after clipping `grads` to global norm
    /// [`CLIP_NORM`]. `names` label tensors in error messages.
    ///
    /// A non-finite gradient leaves both params and state untouched.
    pub fn update(
        &mut self,
        params: &mut [Tensor],
        grads: &Gradients,
        names: &[&str],
    ) -> Result<()> {
        let g = grads.tensors();
        if g.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::Shape {
                op: "adam_update",
                expected: alloc::vec![params.len()],
                actual: alloc::vec![g.len()],
            });
        }
        for ((p, gt), m) in params.iter().zip(g).zip(&self.m) {
            gt.expect_shape("adam_update", p.shape())?;
            m.expect_shape("adam_update", p.shape())?;
        }
        if let Some(name) = first_non_finite(grads, names) {
            return Err(Error::NonFiniteGradient(name));
        }

        let norm = grads.global_norm();
        let clip = if norm > CLIP_NORM {
            CLIP_NORM / norm
        } else {
            1.0
        };

        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let bc1 = 1.0 - libm::pow(b1, t as f64);
        let bc2 = 1.0 - libm::pow(b2, t as f64);
        for (((p, gt), m), v) in params
            .iter_mut()
            .zip(g)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
            for (i, &gi) in gt.data().iter().enumerate() {
                let gi = gi as f64 * clip;
                let mi = b1 * m[i] as f64 + (1.0 - b1) * gi;
                let vi = b2 * v[i] as f64 + (1.0 - b2) * gi * gi;
                m[i] = mi as f32;
                v[i] = vi as f32;
                let step = self.lr * (mi / bc1) / (libm::sqrt(vi / bc2) + self.eps);
                p[i] = (p[i] as f64 - step) as f32;
            }
        }
        Ok(())
    }
}
