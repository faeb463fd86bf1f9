//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

pub mod mock;
pub mod toy;

use nca_core::model::Hyper;
use nca_core::Tensor;

pub const SOS: usize = 1;
pub const EOS: usize = 2;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One LSTM step in f64; gate rows ordered input, forget, candidate, output.
pub fn lstm64(w: &[f64], b: &[f64], x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hidden = h.len();
    let cols = x.len() + hidden;
    let xh: Vec<f64> = x.iter().chain(h).copied().collect();
    let z: Vec<f64> = (0..4 * hidden)
        .map(|r| b[r] + (0..cols).map(|k| w[r * cols + k] * xh[k]).sum::<f64>())
        .collect();
    let mut h2 = vec![0.0; hidden];
    let mut c2 = vec![0.0; hidden];
    for j in 0..hidden {
        let i = sigmoid(z[j]);
        let f = sigmoid(z[hidden + j]);
        let g = z[2 * hidden + j].tanh();
        let o = sigmoid(z[3 * hidden + j]);
        c2[j] = f * c[j] + i * g;
        h2[j] = o * c2[j].tanh();
    }
    (h2, c2)
}

pub fn linear64(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    (0..b.len())
        .map(|r| b[r] + (0..cols).map(|k| w[r * cols + k] * x[k]).sum::<f64>())
        .collect()
}

pub fn xent64(logits: &[f64], target: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    m + z.ln() - logits[target]
}

pub fn to64(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&x| x as f64).collect()
}

/// Teacher-forced mean per-token loss of the whole encoder-decoder, written
/// from the model description rather than from the crate's code.
pub fn seq2seq_loss64(hyper: Hyper, p: &[Vec<f64>], src: &[usize], tgt: &[usize]) -> f64 {
    let (e, h) = (hyper.embed_dim, hyper.hidden_dim);
    let emb = |id: usize| p[0][id * e..(id + 1) * e].to_vec();
    let mut hs = vec![0.0; h];
    let mut cs = vec![0.0; h];
    for &t in src {
        (hs, cs) = lstm64(&p[1], &p[2], &emb(t), &hs, &cs);
    }
    let mut inputs = vec![SOS];
    inputs.extend_from_slice(tgt);
    let mut targets = tgt.to_vec();
    targets.push(EOS);
    let mut total = 0.0;
    for (i, t) in inputs.iter().zip(&targets) {
        (hs, cs) = lstm64(&p[3], &p[4], &emb(*i), &hs, &cs);
        total += xent64(&linear64(&p[5], &p[6], &hs), *t);
    }
    total / targets.len() as f64
}

/// Central difference of `f` at every coordinate of `params[which]`.
pub fn central_diff<F>(params: &[Vec<f64>], which: usize, eps: f64, f: F) -> Vec<f64>
where
    F: Fn(&[Vec<f64>]) -> f64,
{
    let mut work = params.to_vec();
    (0..params[which].len())
        .map(|k| {
            let x = work[which][k];
            work[which][k] = x + eps;
            let up = f(&work);
            work[which][k] = x - eps;
            let down = f(&work);
            work[which][k] = x;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// |a − n| / max(|a|, |n|, floor).
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}
