//! Core of a small neural conversational agent that learns online from
//! human feedback.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only computation:
//! dense tensor kernels with a gradient tape, an LSTM encoder-decoder,
//! Adam, greedy and hamming-diverse decoding, supervised training loops,
//! the per-turn online learning session, and evaluation probes. File
//! formats, HTTP and the CLI live in the `nca` crate.
//!
//! A session turn looks like this:
//!
//! ```
//! use nca_core::{Feedback, Hyper, Seq2SeqParams, Session, SessionConfig, Vocab};
//!
//! let vocab = Vocab::build(&[("hello there", "hi")], 1);
//! let hyper = Hyper { vocab_size: vocab.len(), embed_dim: 8, hidden_dim: 8, max_len: 6 };
//! let params = Seq2SeqParams::init(hyper, 7);
//! let mut session = Session::new("demo", params, vocab.into(), SessionConfig::default());
//!
//! let turn = session.user_message("hello there").unwrap();
//! assert_eq!(turn.candidates.len(), 5);
//! let result = session.apply_feedback(Feedback::Text("hi".into())).unwrap();
//! assert!(result.updated);
//! ```
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod decode;
mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod optim;
pub mod session;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod vocab;

pub use decode::{
    augmented_scores, greedy, hamming_dbs, order_for_display, BeamSet, DecodeConfig, DisplayOrder,
    Ordering, StepScorer,
};
pub use error::{Error, Result};
pub use eval::{distinct_n, DiversityReport, ProbeReport, ProbeRow, ProbeSets};
pub use model::{Hyper, Seq2SeqParams};
pub use nn::LstmState;
pub use optim::AdamState;
pub use session::{
    one_shot_check, replay_records, Candidate, ConfigPatch, DisplayedCandidate, Feedback,
    FeedbackKind, FeedbackValue, InteractionRecord, Session, SessionConfig, TurnView, UpdateResult,
};
pub use tape::{GradTape, Gradients, ParamId, ValueId};
pub use tensor::Tensor;
pub use train::{two_phase, EncodedCorpus, EpochStats, TwoPhaseConfig};
pub use vocab::{tokenize, Vocab};
