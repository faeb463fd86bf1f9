//! Greedy decoding and hamming-diverse decoding of K candidate responses.
//!
//! Hamming-diverse decoding runs K greedy decoders in lock-step. At each
//! position `t`, beam 1 takes its plain argmax; every later beam `i` takes
//! the argmax of its log-probabilities minus `λ` times the number of earlier
//! beams that already placed the same token at `t`. The reference formulation
//! phrases the term as a hamming-distance reward `λ·(i−1) − λ·count`; the
//! two forms differ by a constant per step, so they pick the same token.
//!
//! `λ` is `lambda_first` at the first position and `lambda_rest` after it.
//! A beam that emits EOS is frozen: it is never extended and places no
//! tokens at later positions. Ties go to the lowest token id.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::vocab::{EOS, PAD, SOS, UNK};
use crate::{Error, Result};

/// Tokens decoding never emits.
pub const MASKED: [usize; 2] = [PAD, UNK];

/// Anything that yields next-token log-probabilities step by step.
pub trait StepScorer {
    type State: Clone;

    fn vocab_size(&self) -> usize;

    /// Decoder state after reading the source sequence.
    fn start(&self, src: &[usize]) -> Result<Self::State>;

    /// Log-probabilities over the vocabulary for the token after `prev`.
    fn next(&self, state: &Self::State, prev: usize) -> Result<(Vec<f32>, Self::State)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    #[default]
    Likelihood,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecodeConfig {
    pub k: usize,
    pub lambda_first: f64,
    pub lambda_rest: f64,
    pub max_len: usize,
    pub ordering: Ordering,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            k: 5,
            lambda_first: 100.0,
            lambda_rest: 2.0,
            max_len: 20,
            ordering: Ordering::Likelihood,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.max_len == 0 {
            return Err(Error::InvalidConfig("max_len must be at least 1".into()));
        }
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.lambda_first) || !ok(self.lambda_rest) {
            return Err(Error::InvalidConfig(
                "diversity weights must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    fn lambda_at(&self, t: usize) -> f64 {
        if t == 0 {
            self.lambda_first
        } else {
            self.lambda_rest
        }
    }
}

/// The K hypotheses of one decode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSet {
    /// Token ids per beam; a finished beam ends with EOS.
    pub beams: Vec<Vec<usize>>,
    /// Sum of the raw (unpenalized) log-probabilities of each beam's tokens.
    pub log_scores: Vec<f64>,
    pub finished: Vec<bool>,
}

impl BeamSet {
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    /// Index of the highest-scoring beam; lowest index on ties.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.log_scores.iter().enumerate() {
            if *s > self.log_scores[best] {
                best = i;
            }
        }
        best
    }
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

fn masked_scores(log_probs: &[f32]) -> Vec<f64> {
    let mut s: Vec<f64> = log_probs.iter().map(|x| *x as f64).collect();
    for m in MASKED {
        if let Some(x) = s.get_mut(m) {
            *x = f64::NEG_INFINITY;
        }
    }
    s
}

/// `log_probs[w] − λ·#{j : prior[j] = w}`.
pub fn augmented_scores(log_probs: &[f64], prior_tokens: &[usize], lambda: f64) -> Vec<f64> {
    let mut out = log_probs.to_vec();
    for &w in prior_tokens {
        if let Some(x) = out.get_mut(w) {
            *x -= lambda;
        }
    }
    out
}

/// Argmax decode from SOS until EOS or `max_len` tokens.
pub fn greedy<S: StepScorer + ?Sized>(
    scorer: &S,
    src: &[usize],
    max_len: usize,
) -> Result<Vec<usize>> {
    let cfg = DecodeConfig {
        k: 1,
        max_len,
        ..DecodeConfig::default()
    };
    Ok(hamming_dbs(scorer, src, &cfg)?.beams.swap_remove(0))
}

pub fn hamming_dbs<S: StepScorer + ?Sized>(
    scorer: &S,
    src: &[usize],
    cfg: &DecodeConfig,
) -> Result<BeamSet> {
    cfg.validate()?;
    if src.is_empty() {
        return Err(Error::EmptySequence("decode"));
    }
    let k = cfg.k;
    let start = scorer.start(src)?;
    let mut states = vec![start; k];
    let mut beams: Vec<Vec<usize>> = vec![Vec::with_capacity(cfg.max_len); k];
    let mut log_scores = vec![0.0f64; k];
    let mut finished = vec![false; k];

    for t in 0..cfg.max_len {
        let lambda = cfg.lambda_at(t);
        let mut placed: Vec<usize> = Vec::with_capacity(k);
        for i in 0..k {
            if finished[i] {
                continue;
            }
            let prev = beams[i].last().copied().unwrap_or(SOS);
            let (lp, next) = scorer.next(&states[i], prev)?;
            let raw = masked_scores(&lp);
            let tok = if i == 0 {
                argmax(&raw)
            } else {
                argmax(&augmented_scores(&raw, &placed, lambda))
            };
            beams[i].push(tok);
            log_scores[i] += lp[tok] as f64;
            states[i] = next;
            placed.push(tok);
            if tok == EOS {
                finished[i] = true;
            }
        }
        if finished.iter().all(|f| *f) {
            break;
        }
    }

    Ok(BeamSet {
        beams,
        log_scores,
        finished,
    })
}

/// Display order of a beam set: `order[p]` is the beam shown at position `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayOrder {
    pub order: Vec<usize>,
}

impl DisplayOrder {
    /// Beam index shown at display position `p` (0-based).
    pub fn beam_at(&self, p: usize) -> Option<usize> {
        self.order.get(p).copied()
    }

    /// `inverse()[beam]` is the display position of `beam`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.order.len()];
        for (p, b) in self.order.iter().enumerate() {
            inv[*b] = p;
        }
        inv
    }
}

/// Likelihood order (score descending, beam index on ties) or a seeded
/// shuffle.
pub fn order_for_display(beams: &BeamSet, policy: Ordering, seed: u64) -> DisplayOrder {
    let mut order: Vec<usize> = (0..beams.len()).collect();
    match policy {
        Ordering::Likelihood => order.sort_by(|a, b| {
            beams.log_scores[*b]
                .partial_cmp(&beams.log_scores[*a])
                .unwrap_or(core::cmp::Ordering::Equal)
        }),
        Ordering::Random => order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
    }
    DisplayOrder { order }
}
