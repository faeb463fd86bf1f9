//! Small seeded corpus and a model trained on it.

use nca_core::model::Hyper;
use nca_core::train::{train_epoch, EncodedCorpus};
use nca_core::{AdamState, InteractionRecord, Seq2SeqParams, Vocab};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; 10] = [
    "anna", "bob", "carl", "dina", "eve", "fred", "gina", "hank", "ida", "jon",
];
const THINGS: [&str; 10] = [
    "pizza", "tea", "music", "rain", "books", "games", "dogs", "cake", "snow", "films",
];
const FEELS: [&str; 6] = ["love", "hate", "like", "miss", "need", "trust"];

/// `n` distinct prompt/reply pairs over a vocabulary of about fifty words.
pub fn pairs(n: usize, seed: u64) -> Vec<(String, String)> {
    let mut all = Vec::new();
    for name in NAMES {
        for thing in THINGS {
            all.push((
                format!("do you like {thing} , {name} ?"),
                format!("yes i like {thing} ."),
            ));
            all.push((
                format!("{name} wants {thing}"),
                format!("give {name} some {thing}"),
            ));
        }
        for feel in FEELS {
            all.push((format!("i {feel} you {name}"), format!("i {feel} you too")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    all.shuffle(&mut rng);
    all.truncate(n);
    all
}

/// Vocabulary over every pair `pairs` can produce.
pub fn vocab() -> Vocab {
    Vocab::build(&pairs(usize::MAX, 0), 1)
}

pub fn hyper(vocab: &Vocab) -> Hyper {
    Hyper {
        vocab_size: vocab.len(),
        embed_dim: 16,
        hidden_dim: 32,
        max_len: 10,
    }
}

/// A model trained for `epochs` on `train`.
pub fn trained(
    vocab: &Vocab,
    train: &[(String, String)],
    epochs: usize,
    seed: u64,
) -> Seq2SeqParams {
    let mut params = Seq2SeqParams::init(hyper(vocab), seed);
    let mut adam = AdamState::new(params.tensors(), 0.01);
    let enc = EncodedCorpus::encode(vocab, train);
    for epoch in 0..epochs {
        train_epoch(&mut params, &mut adam, &enc.pairs, 4, seed, epoch).unwrap();
    }
    params
}

/// Freeform-feedback records teaching `pairs`, in a seeded order, `reps`
/// times each.
pub fn records(
    pairs: &[(String, String)],
    reps: usize,
    lr: f64,
    seed: u64,
) -> Vec<InteractionRecord> {
    let mut order: Vec<usize> = (0..reps).flat_map(|_| 0..pairs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order
        .into_iter()
        .enumerate()
        .map(|(t, i)| {
            let (u, c) = &pairs[i];
            InteractionRecord {
                timestamp: rng.gen_range(0..1000),
                turn: t + 1,
                user_msg: u.clone(),
                candidates: Vec::new(),
                display_permutation: Vec::new(),
                feedback_type: nca_core::FeedbackKind::Freeform,
                feedback_value: Some(nca_core::FeedbackValue::Text(c.clone())),
                chosen_response: c.clone(),
                lr,
                loss_after_update: None,
            }
        })
        .collect()
}
