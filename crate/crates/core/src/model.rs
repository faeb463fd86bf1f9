//! LSTM encoder-decoder.
//!
//! One embedding table is shared by encoder and decoder. The encoder's
//! final state seeds the decoder; there is no attention.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decode::StepScorer;
use crate::nn::{embed, lstm_forward, LstmState, LstmWeights};
use crate::tape::{project, GradTape, Gradients, ParamId};
use crate::tensor::{log_softmax, Tensor};
use crate::vocab::{EOS, SOS};
use crate::{Error, Result};

pub const EMBEDDING: ParamId = ParamId(0);
pub const ENCODER_W: ParamId = ParamId(1);
pub const ENCODER_B: ParamId = ParamId(2);
pub const DECODER_W: ParamId = ParamId(3);
pub const DECODER_B: ParamId = ParamId(4);
pub const OUTPUT_W: ParamId = ParamId(5);
pub const OUTPUT_B: ParamId = ParamId(6);

/// Tensor names in storage order.
pub const PARAM_NAMES: [&str; 7] = [
    "embedding",
    "encoder.w",
    "encoder.b",
    "decoder.w",
    "decoder.b",
    "output.w",
    "output.b",
];

const INIT_RANGE: f32 = 0.08;
const FORGET_BIAS: f32 = 1.0;

/// Model dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Hyper {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Longest source or decoded sequence, in tokens.
    pub max_len: usize,
}

impl Hyper {
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: 64,
            hidden_dim: 64,
            max_len: 20,
        }
    }

    pub fn shapes(&self) -> [Vec<usize>; 7] {
        let (v, e, h) = (self.vocab_size, self.embed_dim, self.hidden_dim);
        [
            alloc::vec![v, e],
            alloc::vec![4 * h, e + h],
            alloc::vec![4 * h],
            alloc::vec![4 * h, e + h],
            alloc::vec![4 * h],
            alloc::vec![v, h],
            alloc::vec![v],
        ]
    }
}

/// All learnable tensors, indexed by the `ParamId` constants above.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqParams {
    hyper: Hyper,
    tensors: Vec<Tensor>,
}

impl Seq2SeqParams {
    pub fn zeros(hyper: Hyper) -> Self {
        let tensors = hyper.shapes().iter().map(|s| Tensor::zeros(s)).collect();
        Self { hyper, tensors }
    }

    /// Uniform init in ±0.08, forget-gate biases at +1.
    pub fn init(hyper: Hyper, seed: u64) -> Self {
        let mut params = Self::zeros(hyper);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &mut params.tensors {
            for x in t.data_mut() {
                *x = rng.gen_range(-INIT_RANGE..INIT_RANGE);
            }
        }
        let h = hyper.hidden_dim;
        for id in [ENCODER_B, DECODER_B] {
            for x in &mut params.tensors[id.0].data_mut()[h..2 * h] {
                *x = FORGET_BIAS;
            }
        }
        params
    }

    /// Assembles parameters from tensors in [`PARAM_NAMES`] order.
    pub fn from_tensors(hyper: Hyper, tensors: Vec<Tensor>) -> Result<Self> {
        let shapes = hyper.shapes();
        if tensors.len() != shapes.len() {
            return Err(Error::Shape {
                op: "params",
                expected: alloc::vec![shapes.len()],
                actual: alloc::vec![tensors.len()],
            });
        }
        for (t, s) in tensors.iter().zip(&shapes) {
            t.expect_shape("params", s)?;
        }
        Ok(Self { hyper, tensors })
    }

    pub fn hyper(&self) -> Hyper {
        self.hyper
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    fn check_token(&self, id: usize) -> Result<()> {
        if id >= self.hyper.vocab_size {
            return Err(Error::TokenOutOfRange {
                id,
                vocab_size: self.hyper.vocab_size,
            });
        }
        Ok(())
    }

    fn encoder(&self) -> LstmWeights<'_> {
        LstmWeights {
            w: self.get(ENCODER_W),
            b: self.get(ENCODER_B),
        }
    }

    fn decoder(&self) -> LstmWeights<'_> {
        LstmWeights {
            w: self.get(DECODER_W),
            b: self.get(DECODER_B),
        }
    }

    /// Final encoder state after reading `src` (truncated to `max_len`).
    pub fn encode(&self, src: &[usize]) -> Result<LstmState> {
        if src.is_empty() {
            return Err(Error::EmptySequence("encode"));
        }
        let mut state = LstmState::zeros(self.hyper.hidden_dim);
        for &tok in src.iter().take(self.hyper.max_len) {
            let x = embed(self.get(EMBEDDING), tok)?;
            state = lstm_forward(&x, &state, self.encoder())?.0;
        }
        Ok(state)
    }

    /// One decoder step: log-probabilities of the next token given the
    /// previous one.
    pub fn step(&self, state: &LstmState, prev: usize) -> Result<(Vec<f32>, LstmState)> {
        self.check_token(prev)?;
        let x = embed(self.get(EMBEDDING), prev)?;
        let (next, _) = lstm_forward(&x, state, self.decoder())?;
        let logits = project(self.get(OUTPUT_W), self.get(OUTPUT_B), &next.h);
        let lp = log_softmax(&logits).into_iter().map(|x| x as f32).collect();
        Ok((lp, next))
    }

    /// Teacher-forced mean per-token cross-entropy of `tgt` given `src`.
    ///
    /// The decoder reads `SOS, tgt…` and predicts `tgt…, EOS`. The target is
    /// cut to `max_len − 1` tokens so that with EOS it fits in `max_len`.
    pub fn pair_loss(&self, src: &[usize], tgt: &[usize]) -> Result<(f64, GradTape)> {
        if src.is_empty() {
            return Err(Error::EmptySequence("pair_loss source"));
        }
        if tgt.is_empty() {
            return Err(Error::EmptySequence("pair_loss target"));
        }
        let p = &self.tensors[..];
        let hidden = self.hyper.hidden_dim;
        let mut tape = GradTape::new();

        let mut h = tape.input(alloc::vec![0.0; hidden]);
        let mut c = tape.input(alloc::vec![0.0; hidden]);
        for &tok in src.iter().take(self.hyper.max_len) {
            let x = tape.embed(p, EMBEDDING, tok)?;
            (h, c) = tape.lstm(p, (ENCODER_W, ENCODER_B), x, (h, c))?;
        }

        let tgt = &tgt[..tgt.len().min(self.hyper.max_len.saturating_sub(1).max(1))];
        let inputs = core::iter::once(SOS).chain(tgt.iter().copied());
        let targets = tgt.iter().copied().chain(core::iter::once(EOS));
        let mut losses = Vec::with_capacity(tgt.len() + 1);
        for (inp, target) in inputs.zip(targets) {
            self.check_token(target)?;
            let x = tape.embed(p, EMBEDDING, inp)?;
            (h, c) = tape.lstm(p, (DECODER_W, DECODER_B), x, (h, c))?;
            let logits = tape.linear(p, (OUTPUT_W, OUTPUT_B), h)?;
            losses.push(tape.xent(logits, target)?);
        }
        let loss = tape.mean(&losses)?;
        tape.set_output(loss);
        Ok((tape.scalar(loss)?, tape))
    }

    /// Loss and parameter gradients of one pair.
    pub fn pair_grad(&self, src: &[usize], tgt: &[usize]) -> Result<(f64, Gradients)> {
        let (loss, tape) = self.pair_loss(src, tgt)?;
        Ok((loss, tape.backward(&self.tensors, 1.0)?))
    }

    /// Number of predicted tokens `pair_loss` averages over.
    pub fn target_tokens(&self, tgt: &[usize]) -> usize {
        tgt.len().min(self.hyper.max_len.saturating_sub(1).max(1)) + 1
    }
}

impl StepScorer for Seq2SeqParams {
    type State = LstmState;

    fn vocab_size(&self) -> usize {
        self.hyper.vocab_size
    }

    fn start(&self, src: &[usize]) -> Result<LstmState> {
        self.encode(src)
    }

    fn next(&self, state: &LstmState, prev: usize) -> Result<(Vec<f32>, LstmState)> {
        self.step(state, prev)
    }
}
