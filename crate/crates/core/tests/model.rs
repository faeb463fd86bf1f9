use nca_core::decode::greedy;
use nca_core::model::{Hyper, PARAM_NAMES};
use nca_core::{tokenize, AdamState, Seq2SeqParams, Vocab};
use proptest::prelude::*;

#[test]
fn memorized_pair_decodes_exactly() {
    let pairs = [("are you there", "yes i am here")];
    let vocab = Vocab::build(&pairs, 1);
    let hyper = Hyper {
        vocab_size: vocab.len(),
        embed_dim: 16,
        hidden_dim: 16,
        max_len: 10,
    };
    let mut p = Seq2SeqParams::init(hyper, 7);
    let mut adam = AdamState::new(p.tensors(), 0.01);
    let src = vocab.encode(pairs[0].0);
    let tgt = vocab.encode(pairs[0].1);
    let mut loss = f64::INFINITY;
    for _ in 0..500 {
        let (l, g) = p.pair_grad(&src, &tgt).unwrap();
        loss = l;
        if loss < 0.05 {
            break;
        }
        adam.update(p.tensors_mut(), &g, &PARAM_NAMES).unwrap();
    }
    assert!(loss < 0.05, "loss {loss}");
    let mut expected = tgt.clone();
    expected.push(2);
    assert_eq!(greedy(&p, &src, 10).unwrap(), expected);
    assert_eq!(vocab.decode(&expected), pairs[0].1);
}

#[test]
fn tokenizer_examples() {
    assert_eq!(tokenize("Hello my friend."), ["hello", "my", "friend", "."]);
    assert_eq!(tokenize("I don't know."), ["i", "don't", "know", "."]);
    assert_eq!(tokenize("Why not?"), ["why", "not", "?"]);
    assert!(tokenize("   ").is_empty());
}

proptest! {
    #[test]
    fn tokenize_is_idempotent(s in "[A-Za-z' .,!?;:\"…\t-]{0,40}") {
        let once = tokenize(&s);
        let twice = tokenize(&once.join(" "));
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn in_vocab_round_trip(words in proptest::collection::vec("[a-z]{1,6}", 1..8)) {
        let text = words.join(" ");
        let vocab = Vocab::build(&[(text.as_str(), "x")], 1);
        prop_assert_eq!(vocab.decode(&vocab.encode(&text)), text);
    }
}
