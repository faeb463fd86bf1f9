//! The online learning loop.
//!
//! Each turn: the user sends a message, the session decodes K diverse
//! candidates and shows them, the user picks one, writes a better reply or
//! skips, and the chosen pair gets one gradient step. Every turn appends
//! exactly one [`InteractionRecord`]; the records alone reproduce the
//! parameters through [`replay_records`].

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::decode::{greedy, hamming_dbs, order_for_display, DecodeConfig, Ordering};
use crate::model::{Seq2SeqParams, PARAM_NAMES};
use crate::optim::{AdamState, DEFAULT_LR};
use crate::vocab::{Vocab, EOS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SessionConfig {
    pub k: usize,
    pub lr: f64,
    pub lambda_first: f64,
    pub lambda_rest: f64,
    pub ordering: Ordering,
    /// Seeds the random display order.
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let d = DecodeConfig::default();
        Self {
            k: d.k,
            lr: DEFAULT_LR,
            lambda_first: d.lambda_first,
            lambda_rest: d.lambda_rest,
            ordering: d.ordering,
            seed: 0,
        }
    }
}

impl SessionConfig {
    pub fn decode(&self, max_len: usize) -> DecodeConfig {
        DecodeConfig {
            k: self.k,
            lambda_first: self.lambda_first,
            lambda_rest: self.lambda_rest,
            max_len,
            ordering: self.ordering,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::InvalidConfig(
                "lr must be finite and non-negative".into(),
            ));
        }
        self.decode(1).validate()
    }
}

/// Partial config update; absent fields keep their value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConfigPatch {
    pub k: Option<usize>,
    pub lr: Option<f64>,
    pub lambda_first: Option<f64>,
    pub lambda_rest: Option<f64>,
    pub ordering: Option<Ordering>,
    pub seed: Option<u64>,
}

impl ConfigPatch {
    pub fn apply(&self, cfg: &SessionConfig) -> Result<SessionConfig> {
        let next = SessionConfig {
            k: self.k.unwrap_or(cfg.k),
            lr: self.lr.unwrap_or(cfg.lr),
            lambda_first: self.lambda_first.unwrap_or(cfg.lambda_first),
            lambda_rest: self.lambda_rest.unwrap_or(cfg.lambda_rest),
            ordering: self.ordering.unwrap_or(cfg.ordering),
            seed: self.seed.unwrap_or(cfg.seed),
        };
        next.validate()?;
        Ok(next)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Candidate {
    pub text: String,
    pub log_score: f64,
}

/// A candidate as shown: `index` is its 1-based display position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DisplayedCandidate {
    pub index: usize,
    pub text: String,
    pub log_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnView {
    pub candidates: Vec<DisplayedCandidate>,
    /// `display_order[p]` is the 1-based generation index of the candidate
    /// shown at position `p + 1`.
    pub display_order: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackKind {
    Select,
    Freeform,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeedbackValue {
    Index(usize),
    Text(String),
}

/// What the user answered to a set of candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feedback {
    /// 1-based display position.
    Select(usize),
    /// A better reply written by the user; blank text counts as a skip.
    Text(String),
    Skip,
}

impl Feedback {
    /// Terminal convention: a number selects, blank skips, anything else is
    /// a written reply.
    pub fn parse(line: &str) -> Self {
        let t = line.trim();
        if t.is_empty() {
            Feedback::Skip
        } else if let Ok(k) = t.parse::<usize>() {
            Feedback::Select(k)
        } else {
            Feedback::Text(String::from(t))
        }
    }
}

/// One turn of the loop, as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InteractionRecord {
    pub timestamp: u64,
    pub turn: usize,
    pub user_msg: String,
    /// In generation order.
    pub candidates: Vec<Candidate>,
    pub display_permutation: Vec<usize>,
    pub feedback_type: FeedbackKind,
    pub feedback_value: Option<FeedbackValue>,
    pub chosen_response: String,
    pub lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_after_update: Option<f64>,
}

impl InteractionRecord {
    pub fn updated(&self) -> bool {
        self.feedback_type != FeedbackKind::Skip
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UpdateResult {
    pub chosen_response: String,
    pub updated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
}

#[derive(Debug, Clone)]
struct PendingTurn {
    user_msg: String,
    candidates: Vec<Candidate>,
    best: usize,
    /// 0-based generation index per display position.
    order: Vec<usize>,
}

/// Milliseconds since some epoch; injected so that logs can be reproduced.
pub type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

/// One trainer's conversation with its own copy of the model.
pub struct Session {
    id: String,
    params: Seq2SeqParams,
    vocab: Arc<Vocab>,
    adam: AdamState,
    config: SessionConfig,
    transcript: Vec<InteractionRecord>,
    pending: Option<PendingTurn>,
    clock: Clock,
}

impl core::fmt::Debug for Session {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("config", &self.config)
            .field("turns", &self.transcript.len())
            .field("pending", &self.pending.is_some())
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        params: Seq2SeqParams,
        vocab: Arc<Vocab>,
        config: SessionConfig,
    ) -> Self {
        let adam = AdamState::new(params.tensors(), config.lr);
        Self {
            id: id.into(),
            params,
            vocab,
            adam,
            config,
            transcript: Vec::new(),
            pending: None,
            clock: Box::new(|| 0),
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn params(&self) -> &Seq2SeqParams {
        &self.params
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn transcript(&self) -> &[InteractionRecord] {
        &self.transcript
    }

    /// Number of completed turns.
    pub fn turns(&self) -> usize {
        self.transcript.len()
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }

    /// Takes effect from the next turn.
    pub fn update_config(&mut self, patch: &ConfigPatch) -> Result<SessionConfig> {
        self.config = patch.apply(&self.config)?;
        Ok(self.config)
    }

    /// Decodes and shows K candidates for `text`. A still-pending turn is
    /// logged as skipped first. Parameters are not touched.
    pub fn user_message(&mut self, text: &str) -> Result<TurnView> {
        let src = self.vocab.encode(text);
        if src.is_empty() {
            return Err(Error::EmptyMessage);
        }
        self.config.validate()?;
        let beams = hamming_dbs(
            &self.params,
            &src,
            &self.config.decode(self.params.hyper().max_len),
        )?;
        let turn = self.transcript.len() + usize::from(self.pending.is_some()) + 1;
        let order = order_for_display(
            &beams,
            self.config.ordering,
            self.config.seed.wrapping_add(turn as u64),
        );

        if self.pending.is_some() {
            self.apply_feedback(Feedback::Skip)?;
        }

        let candidates: Vec<Candidate> = beams
            .beams
            .iter()
            .zip(&beams.log_scores)
            .map(|(b, s)| Candidate {
                text: self.vocab.decode(b),
                log_score: *s,
            })
            .collect();
        let view = TurnView {
            candidates: order
                .order
                .iter()
                .enumerate()
                .map(|(p, &b)| DisplayedCandidate {
                    index: p + 1,
                    text: candidates[b].text.clone(),
                    log_score: candidates[b].log_score,
                })
                .collect(),
            display_order: order.order.iter().map(|b| b + 1).collect(),
        };
        self.pending = Some(PendingTurn {
            user_msg: String::from(text),
            candidates,
            best: beams.best(),
            order: order.order,
        });
        Ok(view)
    }

    /// Resolves the reply for the pending turn and, unless skipped, takes one
    /// Adam step on (message, reply) at the session learning rate.
    pub fn apply_feedback(&mut self, feedback: Feedback) -> Result<UpdateResult> {
        let pending = self.pending.as_ref().ok_or(Error::NoPendingTurn)?;
        let k = pending.candidates.len();
        let (kind, value, chosen) = match feedback {
            Feedback::Select(index) => {
                if index == 0 || index > k {
                    return Err(Error::SelectionOutOfRange { index, k });
                }
                let beam = pending.order[index - 1];
                (
                    FeedbackKind::Select,
                    Some(FeedbackValue::Index(index)),
                    pending.candidates[beam].text.clone(),
                )
            }
            Feedback::Text(t) if !t.trim().is_empty() => (
                FeedbackKind::Freeform,
                Some(FeedbackValue::Text(t.clone())),
                t,
            ),
            Feedback::Text(_) | Feedback::Skip => (
                FeedbackKind::Skip,
                None,
                pending.candidates[pending.best].text.clone(),
            ),
        };

        if kind != FeedbackKind::Skip && self.vocab.encode(&chosen).is_empty() {
            return Err(Error::EmptyReply);
        }
        let lr = self.config.lr;
        let loss = if kind == FeedbackKind::Skip {
            None
        } else {
            self.adam.lr = lr;
            Some(online_update(
                &mut self.params,
                &mut self.adam,
                &self.vocab,
                &pending.user_msg,
                &chosen,
            )?)
        };

        let pending = self.pending.take().expect("checked above");
        self.transcript.push(InteractionRecord {
            timestamp: (self.clock)(),
            turn: self.transcript.len() + 1,
            user_msg: pending.user_msg,
            candidates: pending.candidates,
            display_permutation: pending.order.iter().map(|b| b + 1).collect(),
            feedback_type: kind,
            feedback_value: value,
            chosen_response: chosen.clone(),
            lr,
            loss_after_update: loss,
        });
        Ok(UpdateResult {
            chosen_response: chosen,
            updated: loss.is_some(),
            loss,
        })
    }

    /// Whether greedy decoding of `message` now yields exactly `reply`.
    pub fn one_shot_check(&self, message: &str, reply: &str) -> bool {
        one_shot_check(&self.params, &self.vocab, message, reply)
    }
}

/// Token ids the decoder must emit for `reply` to be reproduced: the reply
/// cut to `max_len − 1` tokens, then EOS.
pub fn expected_decode(params: &Seq2SeqParams, vocab: &Vocab, reply: &str) -> Vec<usize> {
    let mut ids = vocab.encode(reply);
    ids.truncate(params.target_tokens(&ids) - 1);
    ids.push(EOS);
    ids
}

pub fn one_shot_check(params: &Seq2SeqParams, vocab: &Vocab, message: &str, reply: &str) -> bool {
    let src = vocab.encode(message);
    if src.is_empty() {
        return false;
    }
    match greedy(params, &src, params.hyper().max_len) {
        Ok(out) => out == expected_decode(params, vocab, reply),
        Err(_) => false,
    }
}

/// Forward, backward and one Adam step on a single pair; returns the pair's
/// loss after the step.
pub fn online_update(
    params: &mut Seq2SeqParams,
    adam: &mut AdamState,
    vocab: &Vocab,
    message: &str,
    reply: &str,
) -> Result<f64> {
    let src = vocab.encode(message);
    let tgt = vocab.encode(reply);
    let (_, grads) = params.pair_grad(&src, &tgt)?;
    adam.update(params.tensors_mut(), &grads, &PARAM_NAMES)?;
    Ok(params.pair_loss(&src, &tgt)?.0)
}

/// Re-applies every non-skip record in order with a fresh optimizer.
/// `lr_override` replaces each record's logged learning rate.
pub fn replay_records(
    params: &mut Seq2SeqParams,
    vocab: &Vocab,
    records: &[InteractionRecord],
    lr_override: Option<f64>,
) -> Result<AdamState> {
    let mut adam = AdamState::new(params.tensors(), lr_override.unwrap_or(DEFAULT_LR));
    for r in records.iter().filter(|r| r.updated()) {
        adam.lr = lr_override.unwrap_or(r.lr);
        online_update(params, &mut adam, vocab, &r.user_msg, &r.chosen_response)?;
    }
    Ok(adam)
}
