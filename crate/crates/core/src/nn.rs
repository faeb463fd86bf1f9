//! Forward kernels for the four layer types: embedding lookup, LSTM cell,
//! linear projection and softmax cross-entropy.
//!
//! The functions here are pure. [`crate::tape::GradTape`] records the same
//! kernels together with the activations their backward passes need.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::tensor::{expect_len, log_softmax, matvec_f64, Tensor};
use crate::{Error, Result};

/// Hidden and cell vectors of one LSTM layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub h: Vec<f32>,
    pub c: Vec<f32>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.h.len()
    }
}

/// Weights of one LSTM layer.
///
/// `w` is the stacked `4H × (E + H)` block acting on `[x; h]`, gate rows in
/// the order input, forget, candidate, output. `b` has length `4H`.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    pub w: &'a Tensor,
    pub b: &'a Tensor,
}

impl LstmWeights<'_> {
    fn dims(&self, input: usize, hidden: usize) -> Result<()> {
        self.w
            .expect_shape("lstm_step", &[4 * hidden, input + hidden])?;
        self.b.expect_shape("lstm_step", &[4 * hidden])
    }
}

/// Activations of one LSTM step kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct LstmCache {
    /// `[x; h_prev]`
    pub xh: Vec<f32>,
    pub c_prev: Vec<f32>,
    /// Gate activations `[i; f; g; o]`, each of length H.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

// Largest f32 below 1.0; keeps |h| < 1 after rounding a saturated cell.
const H_BOUND: f64 = 1.0 - f32::EPSILON as f64 / 2.0;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

pub(crate) fn lstm_forward(
    x: &[f32],
    prev: &LstmState,
    w: LstmWeights<'_>,
) -> Result<(LstmState, LstmCache)> {
    let hidden = prev.h.len();
    expect_len("lstm_step", &prev.c, hidden)?;
    if w.w.cols() != x.len() + hidden {
        return Err(Error::Shape {
            op: "lstm_step",
            expected: vec![4 * hidden, w.w.cols().saturating_sub(hidden)],
            actual: vec![4 * hidden, x.len()],
        });
    }
    w.dims(x.len(), hidden)?;

    let mut xh = Vec::with_capacity(x.len() + hidden);
    xh.extend_from_slice(x);
    xh.extend_from_slice(&prev.h);

    let mut z = vec![0.0f64; 4 * hidden];
    matvec_f64(w.w.data(), &xh, w.b.data(), &mut z);

    let mut gates = vec![0.0f64; 4 * hidden];
    for j in 0..hidden {
        gates[j] = sigmoid(z[j]);
        gates[hidden + j] = sigmoid(z[hidden + j]);
        gates[2 * hidden + j] = libm::tanh(z[2 * hidden + j]);
        gates[3 * hidden + j] = sigmoid(z[3 * hidden + j]);
    }

    let mut h = vec![0.0f32; hidden];
    let mut c = vec![0.0f32; hidden];
    let mut tanh_c = vec![0.0f64; hidden];
    for j in 0..hidden {
        let (i, f, g, o) = (
            gates[j],
            gates[hidden + j],
            gates[2 * hidden + j],
            gates[3 * hidden + j],
        );
        let cj = (f * prev.c[j] as f64 + i * g) as f32;
        let tc = libm::tanh(cj as f64);
        c[j] = cj;
        tanh_c[j] = tc;
        h[j] = (o * tc).clamp(-H_BOUND, H_BOUND) as f32;
    }

    let cache = LstmCache {
        xh,
        c_prev: prev.c.clone(),
        gates,
        tanh_c,
    };
    Ok((LstmState { h, c }, cache))
}

/// One LSTM step. Returns the output `h` (equal to `next.h`) and the next
/// state.
pub fn lstm_step(x: &[f32], prev: &LstmState, w: LstmWeights<'_>) -> Result<(Vec<f32>, LstmState)> {
    let (next, _) = lstm_forward(x, prev, w)?;
    Ok((next.h.clone(), next))
}

/// Row `id` of a `V × E` embedding table.
pub fn embed(table: &Tensor, id: usize) -> Result<Vec<f32>> {
    if id >= table.rows() {
        return Err(Error::TokenOutOfRange {
            id,
            vocab_size: table.rows(),
        });
    }
    Ok(table.row(id).to_vec())
}

/// `w · x + b`.
pub fn linear(x: &[f32], w: &Tensor, b: &Tensor) -> Result<Vec<f32>> {
    w.expect_shape("linear", &[b.len(), x.len()])?;
    let mut out = vec![0.0f64; b.len()];
    matvec_f64(w.data(), x, b.data(), &mut out);
    Ok(out.into_iter().map(|v| v as f32).collect())
}

/// `−log softmax(logits)[target]`.
pub fn xent(logits: &[f32], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::TokenOutOfRange {
            id: target,
            vocab_size: logits.len(),
        });
    }
    Ok(-log_softmax(logits)[target])
}
