//! Supervised training: mini-batch epochs and the two-phase schedule
//! (generic corpus, then fine-tuning corpus from the phase-one weights).

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Seq2SeqParams, PARAM_NAMES};
use crate::optim::{AdamState, DEFAULT_LR};
use crate::tape::Gradients;
use crate::vocab::Vocab;
use crate::{Error, Result};

pub const DEFAULT_BATCH_SIZE: usize = 10;

/// Message-response pairs as token ids, tagged with the vocabulary they were
/// encoded with.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCorpus {
    pub pairs: Vec<(Vec<usize>, Vec<usize>)>,
    pub vocab_fingerprint: u64,
    /// Pairs dropped because one side had no tokens.
    pub dropped: usize,
}

impl EncodedCorpus {
    pub fn encode<P: AsRef<str>, R: AsRef<str>>(vocab: &Vocab, pairs: &[(P, R)]) -> Self {
        let mut out = Vec::with_capacity(pairs.len());
        let mut dropped = 0;
        for (p, r) in pairs {
            let (src, tgt) = (vocab.encode(p.as_ref()), vocab.encode(r.as_ref()));
            if src.is_empty() || tgt.is_empty() {
                dropped += 1;
            } else {
                out.push((src, tgt));
            }
        }
        Self {
            pairs: out,
            vocab_fingerprint: vocab.fingerprint(),
            dropped,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpochStats {
    /// Mean over pairs of the per-token loss, measured before each batch's
    /// update.
    pub mean_loss: f64,
    pub tokens: usize,
    pub updates: usize,
}

/// Mean loss and gradient of a batch; each pair contributes its per-token
/// mean.
pub fn batch_grad(
    params: &Seq2SeqParams,
    batch: &[&(Vec<usize>, Vec<usize>)],
) -> Result<(f64, Gradients, usize)> {
    let mut total = Gradients::zeros_like(params.tensors());
    let mut loss = 0.0;
    let mut tokens = 0;
    for (src, tgt) in batch {
        let (l, g) = params.pair_grad(src, tgt)?;
        loss += l;
        tokens += params.target_tokens(tgt);
        total.add_assign(&g);
    }
    total.scale(1.0 / batch.len() as f32);
    Ok((loss / batch.len() as f64, total, tokens))
}

/// One pass over `pairs` in a shuffled order fixed by `(seed, epoch)`, with
/// one Adam step per mini-batch.
pub fn train_epoch(
    params: &mut Seq2SeqParams,
    adam: &mut AdamState,
    pairs: &[(Vec<usize>, Vec<usize>)],
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<EpochStats> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    order.shuffle(&mut rng);

    let mut loss_sum = 0.0;
    let mut tokens = 0;
    let mut updates = 0;
    for chunk in order.chunks(batch_size) {
        let batch: Vec<_> = chunk.iter().map(|&i| &pairs[i]).collect();
        let (loss, grads, n) = batch_grad(params, &batch)?;
        adam.update(params.tensors_mut(), &grads, &PARAM_NAMES)?;
        loss_sum += loss * batch.len() as f64;
        tokens += n;
        updates += 1;
    }
    Ok(EpochStats {
        mean_loss: loss_sum / pairs.len() as f64,
        tokens,
        updates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TwoPhaseConfig {
    pub epochs_a: usize,
    pub epochs_b: usize,
    pub lr_a: f64,
    pub lr_b: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TwoPhaseConfig {
    fn default() -> Self {
        Self {
            epochs_a: 30,
            epochs_b: 30,
            lr_a: DEFAULT_LR,
            lr_b: DEFAULT_LR,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
        }
    }
}

/// Reported after every epoch of either phase.
#[derive(Debug)]
pub struct EpochEvent<'a> {
    /// 1 or 2.
    pub phase: u8,
    /// 1-based within the phase.
    pub epoch: usize,
    pub stats: EpochStats,
    pub params: &'a Seq2SeqParams,
    pub adam: &'a AdamState,
}

/// Phase one on `corpus_a`, then phase two on `corpus_b` from the phase-one
/// weights with a fresh optimizer. Both corpora must be encoded with the
/// vocabulary the parameters were sized for.
pub fn two_phase<F>(
    init: Seq2SeqParams,
    vocab: &Vocab,
    corpus_a: &EncodedCorpus,
    corpus_b: &EncodedCorpus,
    cfg: &TwoPhaseConfig,
    mut on_epoch: F,
) -> Result<Seq2SeqParams>
where
    F: FnMut(EpochEvent<'_>) -> core::result::Result<(), String>,
{
    let fp = vocab.fingerprint();
    for (name, c) in [("phase 1", corpus_a), ("phase 2", corpus_b)] {
        if c.vocab_fingerprint != fp {
            return Err(Error::VocabMismatch(alloc::format!(
                "{name} corpus was encoded with a different vocabulary"
            )));
        }
    }
    if init.hyper().vocab_size != vocab.len() {
        return Err(Error::VocabMismatch(alloc::format!(
            "model has {} output ids, vocabulary has {}",
            init.hyper().vocab_size,
            vocab.len()
        )));
    }

    let mut params = init;
    for (phase, corpus, epochs, lr) in [
        (1u8, corpus_a, cfg.epochs_a, cfg.lr_a),
        (2u8, corpus_b, cfg.epochs_b, cfg.lr_b),
    ] {
        if epochs == 0 {
            continue;
        }
        let mut adam = AdamState::new(params.tensors(), lr);
        let seed = cfg.seed.wrapping_add(phase as u64);
        for epoch in 1..=epochs {
            let stats = train_epoch(
                &mut params,
                &mut adam,
                &corpus.pairs,
                cfg.batch_size,
                seed,
                epoch,
            )?;
            on_epoch(EpochEvent {
                phase,
                epoch,
                stats,
                params: &params,
                adam: &adam,
            })
            .map_err(Error::Callback)?;
        }
    }
    Ok(params)
}
