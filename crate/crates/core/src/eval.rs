//! Automatic probes standing in for human judging: distinct-n diversity,
//! one-shot recall, and held-out perplexity drift under online updates.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decode::{greedy, hamming_dbs, DecodeConfig};
use crate::model::Seq2SeqParams;
use crate::optim::AdamState;
use crate::session::{one_shot_check, online_update, InteractionRecord};
use crate::vocab::{tokenize, Vocab, EOS};
use crate::{Error, Result};

/// Unique n-grams over all candidates divided by the total n-gram count;
/// 0 when there are none.
pub fn distinct_n<T: AsRef<[usize]>>(candidates: &[T], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut seen = BTreeSet::new();
    let mut total = 0usize;
    for c in candidates {
        let c = c.as_ref();
        if c.len() < n {
            continue;
        }
        for gram in c.windows(n) {
            total += 1;
            seen.insert(gram.to_vec());
        }
    }
    if total == 0 {
        0.0
    } else {
        seen.len() as f64 / total as f64
    }
}

fn strip_eos(seq: &[usize]) -> &[usize] {
    match seq.iter().position(|&t| t == EOS) {
        Some(i) => &seq[..i],
        None => seq,
    }
}

/// `exp` of the token-weighted mean cross-entropy over `pairs`.
pub fn perplexity(
    params: &Seq2SeqParams,
    vocab: &Vocab,
    pairs: &[(String, String)],
) -> Result<f64> {
    let mut nll = 0.0;
    let mut tokens = 0usize;
    for (p, r) in pairs {
        let (src, tgt) = (vocab.encode(p), vocab.encode(r));
        if src.is_empty() || tgt.is_empty() {
            continue;
        }
        let (loss, _) = params.pair_loss(&src, &tgt)?;
        let n = params.target_tokens(&tgt);
        nll += loss * n as f64;
        tokens += n;
    }
    if tokens == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(libm::exp(nll / tokens as f64))
}

/// Word pairs swapped by [`rephrase`]; both directions apply.
pub const SYNONYMS: [(&str, &str); 12] = [
    ("hi", "hello"),
    ("like", "love"),
    ("big", "large"),
    ("small", "little"),
    ("good", "nice"),
    ("happy", "glad"),
    ("friend", "pal"),
    ("tell", "show"),
    ("quick", "fast"),
    ("see", "watch"),
    ("want", "need"),
    ("today", "tonight"),
];

fn synonym(word: &str) -> Option<&'static str> {
    SYNONYMS.iter().find_map(|(a, b)| {
        if *a == word {
            Some(*b)
        } else if *b == word {
            Some(*a)
        } else {
            None
        }
    })
}

/// Scripted paraphrase: swaps one word for a listed synonym, or failing
/// that, swaps two adjacent words.
pub fn rephrase(text: &str, seed: u64) -> String {
    let mut toks = tokenize(text);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_syn: Vec<usize> = (0..toks.len())
        .filter(|&i| synonym(&toks[i]).is_some())
        .collect();
    if !with_syn.is_empty() {
        let i = with_syn[rng.gen_range(0..with_syn.len())];
        toks[i] = String::from(synonym(&toks[i]).expect("filtered"));
    } else {
        let words: Vec<usize> = (0..toks.len())
            .filter(|&i| toks[i].chars().any(char::is_alphanumeric))
            .collect();
        if words.len() >= 2 {
            let j = rng.gen_range(0..words.len() - 1);
            toks.swap(words[j], words[j + 1]);
        }
    }
    toks.join(" ")
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeRow {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interactions: Option<usize>,
    /// Learning-rate sweep: share of pairs reproduced by greedy decoding
    /// right after their own update. Interaction sweep: share of trained
    /// prompts reproduced at the cut.
    pub one_shot_rate: f64,
    /// Same, on paraphrased prompts. Reported, not asserted.
    pub rephrased_rate: f64,
    pub distinct1: f64,
    pub distinct2: f64,
    pub perplexity_before: f64,
    pub perplexity_after: f64,
}

impl ProbeRow {
    pub fn perplexity_drift(&self) -> f64 {
        self.perplexity_after - self.perplexity_before
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeReport {
    pub suite: String,
    /// Rate of the untouched model.
    pub baseline_rate: f64,
    pub rows: Vec<ProbeRow>,
}

impl ProbeReport {
    /// Smallest learning rate reaching the highest one-shot rate.
    pub fn best_lr(&self) -> Option<f64> {
        let mut best: Option<&ProbeRow> = None;
        for row in self.rows.iter().filter(|r| r.lr.is_some()) {
            best = match best {
                Some(b)
                    if b.one_shot_rate > row.one_shot_rate
                        || (b.one_shot_rate == row.one_shot_rate && b.lr <= row.lr) =>
                {
                    Some(b)
                }
                _ => Some(row),
            };
        }
        best.and_then(|r| r.lr)
    }
}

/// Inputs shared by the sweeps.
#[derive(Debug, Clone, Copy)]
pub struct ProbeSets<'a> {
    /// Pairs whose prompts are decoded for recall; paraphrases are derived
    /// from them.
    pub probes: &'a [(String, String)],
    /// Pairs never trained on, for perplexity drift.
    pub heldout: &'a [(String, String)],
    pub decode: DecodeConfig,
    pub seed: u64,
}

fn recall(params: &Seq2SeqParams, vocab: &Vocab, pairs: &[(String, String)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits = pairs
        .iter()
        .filter(|(u, c)| one_shot_check(params, vocab, u, c))
        .count();
    hits as f64 / pairs.len() as f64
}

/// Paraphrased prompts with their original replies.
pub fn rephrased(pairs: &[(String, String)], seed: u64) -> Vec<(String, String)> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, (u, c))| (rephrase(u, seed.wrapping_add(i as u64)), c.clone()))
        .collect()
}

/// Mean distinct-1 and distinct-2 of the decoded candidate sets.
pub fn candidate_diversity(
    params: &Seq2SeqParams,
    vocab: &Vocab,
    prompts: &[(String, String)],
    cfg: &DecodeConfig,
) -> Result<(f64, f64)> {
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    let mut n = 0;
    for (u, _) in prompts {
        let src = vocab.encode(u);
        if src.is_empty() {
            continue;
        }
        let beams = hamming_dbs(params, &src, cfg)?;
        let cands: Vec<&[usize]> = beams.beams.iter().map(|b| strip_eos(b)).collect();
        d1 += distinct_n(&cands, 1);
        d2 += distinct_n(&cands, 2);
        n += 1;
    }
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    Ok((d1 / n as f64, d2 / n as f64))
}

struct Snapshot {
    exact: f64,
    rephrased: f64,
    distinct: (f64, f64),
    perplexity: f64,
}

fn snapshot(
    params: &Seq2SeqParams,
    vocab: &Vocab,
    sets: &ProbeSets<'_>,
    paraphrases: &[(String, String)],
) -> Result<Snapshot> {
    Ok(Snapshot {
        exact: recall(params, vocab, sets.probes),
        rephrased: recall(params, vocab, paraphrases),
        distinct: candidate_diversity(params, vocab, sets.probes, &sets.decode)?,
        perplexity: perplexity(params, vocab, sets.heldout)?,
    })
}

/// For each learning rate, applies `training` as consecutive online updates
/// on a fresh copy of `params` and records how often each update made its own
/// reply the greedy output, plus paraphrase recall and perplexity drift.
pub fn lr_sweep(
    params: &Seq2SeqParams,
    vocab: &Vocab,
    training: &[(String, String)],
    sets: &ProbeSets<'_>,
    lrs: &[f64],
) -> Result<ProbeReport> {
    if lrs.is_empty() {
        return Err(Error::InvalidConfig("learning-rate list is empty".into()));
    }
    if training.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let paraphrases = rephrased(sets.probes, sets.seed);
    let before = perplexity(params, vocab, sets.heldout)?;
    let baseline_rate = recall(params, vocab, training);

    let mut rows = Vec::with_capacity(lrs.len());
    for &lr in lrs {
        let mut p = params.clone();
        let mut adam = AdamState::new(p.tensors(), lr);
        let mut hits = 0;
        for (u, c) in training {
            online_update(&mut p, &mut adam, vocab, u, c)?;
            if one_shot_check(&p, vocab, u, c) {
                hits += 1;
            }
        }
        let after = snapshot(&p, vocab, sets, &paraphrases)?;
        rows.push(ProbeRow {
            lr: Some(lr),
            interactions: None,
            one_shot_rate: hits as f64 / training.len() as f64,
            rephrased_rate: after.rephrased,
            distinct1: after.distinct.0,
            distinct2: after.distinct.1,
            perplexity_before: before,
            perplexity_after: after.perplexity,
        });
    }
    Ok(ProbeReport {
        suite: "lr".into(),
        baseline_rate,
        rows,
    })
}

/// Replays growing prefixes of a transcript and measures recall of the probe
/// pairs at each cut.
pub fn interaction_sweep(
    params: &Seq2SeqParams,
    vocab: &Vocab,
    records: &[InteractionRecord],
    prefix_sizes: &[usize],
    sets: &ProbeSets<'_>,
    lr_override: Option<f64>,
) -> Result<ProbeReport> {
    let ascending = prefix_sizes.windows(2).all(|w| w[0] <= w[1]);
    if !ascending || prefix_sizes.last().is_some_and(|&n| n > records.len()) {
        return Err(Error::BadPrefixSizes {
            sizes: prefix_sizes.to_vec(),
            len: records.len(),
        });
    }
    let paraphrases = rephrased(sets.probes, sets.seed);
    let before = perplexity(params, vocab, sets.heldout)?;
    let baseline_rate = recall(params, vocab, sets.probes);

    let mut p = params.clone();
    let mut adam = AdamState::new(p.tensors(), lr_override.unwrap_or(crate::optim::DEFAULT_LR));
    let mut applied = 0;
    let mut rows = Vec::with_capacity(prefix_sizes.len());
    for &cut in prefix_sizes {
        for r in &records[applied..cut] {
            if r.updated() {
                adam.lr = lr_override.unwrap_or(r.lr);
                online_update(&mut p, &mut adam, vocab, &r.user_msg, &r.chosen_response)?;
            }
        }
        applied = cut;
        let s = snapshot(&p, vocab, sets, &paraphrases)?;
        rows.push(ProbeRow {
            lr: None,
            interactions: Some(cut),
            one_shot_rate: s.exact,
            rephrased_rate: s.rephrased,
            distinct1: s.distinct.0,
            distinct2: s.distinct.1,
            perplexity_before: before,
            perplexity_after: s.perplexity,
        });
    }
    Ok(ProbeReport {
        suite: "interactions".into(),
        baseline_rate,
        rows,
    })
}

/// Diversity of hamming-diverse candidates against K copies of the greedy
/// decode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiversityReport {
    pub k: usize,
    pub lambda_first: f64,
    pub lambda_rest: f64,
    pub prompts: usize,
    pub dbs_distinct1: f64,
    pub dbs_distinct2: f64,
    pub greedy_distinct1: f64,
    pub greedy_distinct2: f64,
}

pub fn diversity(
    params: &Seq2SeqParams,
    vocab: &Vocab,
    prompts: &[(String, String)],
    cfg: &DecodeConfig,
) -> Result<DiversityReport> {
    let (dbs1, dbs2) = candidate_diversity(params, vocab, prompts, cfg)?;
    let mut g1 = 0.0;
    let mut g2 = 0.0;
    let mut n = 0;
    for (u, _) in prompts {
        let src = vocab.encode(u);
        if src.is_empty() {
            continue;
        }
        let g = greedy(params, &src, cfg.max_len)?;
        let copies = alloc::vec![strip_eos(&g); cfg.k];
        g1 += distinct_n(&copies, 1);
        g2 += distinct_n(&copies, 2);
        n += 1;
    }
    let n = n.max(1) as f64;
    Ok(DiversityReport {
        k: cfg.k,
        lambda_first: cfg.lambda_first,
        lambda_rest: cfg.lambda_rest,
        prompts: prompts.len(),
        dbs_distinct1: dbs1,
        dbs_distinct2: dbs2,
        greedy_distinct1: g1 / n,
        greedy_distinct2: g2 / n,
    })
}
