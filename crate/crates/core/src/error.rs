use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
    Shape {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },
    #[error("empty sequence passed to {0}")]
    EmptySequence(&'static str),
    #[error("backward called on a tape with no recorded forward pass")]
    BackwardBeforeForward,
    #[error("value {0} is not a scalar")]
    NotScalar(usize),
    #[error("non-finite gradient in tensor `{0}`; update skipped")]
    NonFiniteGradient(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty user message")]
    EmptyMessage,
    #[error("no pending turn to give feedback on")]
    NoPendingTurn,
    #[error("the chosen reply has no tokens to train on")]
    EmptyReply,
    #[error("selection {index} out of range 1..={k}")]
    SelectionOutOfRange { index: usize, k: usize },
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("prefix sizes must be ascending and at most {len}, got {sizes:?}")]
    BadPrefixSizes { sizes: Vec<usize>, len: usize },
    #[error("epoch callback failed: {0}")]
    Callback(String),
}
