//! Mock step scorers with fixed conditional tables, and a literal
//! transcription of hamming-diverse decoding to check the decoder against.

use nca_core::{Result, StepScorer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PAD: usize = 0;
pub const UNK: usize = 3;

/// Next-token table keyed by the whole prefix (SOS first).
#[derive(Debug, Clone)]
pub struct PrefixTable {
    pub vocab: usize,
    pub seed: u64,
    /// When set, the table ignores the prefix and depends only on its length.
    pub context_free: bool,
}

impl PrefixTable {
    pub fn log_probs(&self, prefix: &[usize]) -> Vec<f32> {
        let mut key = self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        if self.context_free {
            key ^= prefix.len() as u64;
        } else {
            for &t in prefix {
                key = key.wrapping_mul(31).wrapping_add(t as u64 + 1);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let logits: Vec<f64> = (0..self.vocab).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
        logits.iter().map(|l| (l - m - z.ln()) as f32).collect()
    }
}

impl StepScorer for PrefixTable {
    type State = Vec<usize>;

    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn start(&self, _src: &[usize]) -> Result<Vec<usize>> {
        Ok(Vec::new())
    }

    fn next(&self, state: &Vec<usize>, prev: usize) -> Result<(Vec<f32>, Vec<usize>)> {
        let mut prefix = state.clone();
        prefix.push(prev);
        Ok((self.log_probs(&prefix), prefix))
    }
}

/// Naive reference decoder: for t = 1..T, beam 1 takes the top
/// token of forward(text, r[1][1..t−1]); beams i = 2..K take the top token
/// of forward(text, r[i]) plus λ·hammingDist to the tokens beams 1..i−1
/// placed at t. Finished beams sit out; PAD/UNK are never chosen.
#[allow(clippy::needless_range_loop)]
pub fn simulate_reference(
    table: &PrefixTable,
    k: usize,
    t_max: usize,
    lambda_first: f64,
    lambda_rest: f64,
) -> (Vec<Vec<usize>>, Vec<f64>) {
    let mut r: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut score = vec![0.0f64; k];
    let done = |beam: &Vec<usize>| beam.last() == Some(&super::EOS);
    for t in 0..t_max {
        let lambda = if t == 0 { lambda_first } else { lambda_rest };
        for i in 0..k {
            if done(&r[i]) {
                continue;
            }
            let mut prefix = vec![super::SOS];
            prefix.extend_from_slice(&r[i]);
            let probs = table.log_probs(&prefix);
            let others: Vec<usize> = (0..i)
                .filter(|&j| r[j].len() == t + 1)
                .map(|j| r[j][t])
                .collect();
            let mut best: Option<(usize, f64)> = None;
            for w in 0..table.vocab {
                if w == PAD || w == UNK {
                    continue;
                }
                let hamming = others.iter().filter(|&&o| o != w).count() as f64;
                let aug = probs[w] as f64 + if i == 0 { 0.0 } else { lambda * hamming };
                if best.is_none_or(|(_, b)| aug > b) {
                    best = Some((w, aug));
                }
            }
            let w = best.expect("unmasked token exists").0;
            r[i].push(w);
            score[i] += probs[w] as f64;
        }
        if r.iter().all(done) {
            break;
        }
    }
    (r, score)
}
