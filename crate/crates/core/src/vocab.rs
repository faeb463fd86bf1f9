//! Word-level tokenizer and vocabulary.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result};

pub const PAD: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

pub const SPECIALS: [&str; 4] = ["<pad>", "<sos>", "<eos>", "<unk>"];

pub const DEFAULT_MAX_SIZE: usize = 8000;

const EDGE_PUNCT: [char; 8] = ['.', ',', '!', '?', ';', ':', '"', '…'];

fn is_edge_punct(c: char) -> bool {
    EDGE_PUNCT.contains(&c)
}

/// Lowercases, splits on whitespace and peels punctuation off both ends of
/// each word as single-character tokens. Interior apostrophes stay attached.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let word = word.to_lowercase();
        let chars: Vec<char> = word.chars().collect();
        let lead = chars.iter().take_while(|c| is_edge_punct(**c)).count();
        let trail = chars[lead..]
            .iter()
            .rev()
            .take_while(|c| is_edge_punct(**c))
            .count();
        for c in &chars[..lead] {
            out.push(c.to_string());
        }
        if lead + trail < chars.len() {
            out.push(chars[lead..chars.len() - trail].iter().collect());
        }
        for c in &chars[chars.len() - trail..] {
            out.push(c.to_string());
        }
    }
    out
}

/// Bijection between tokens and ids `0..len`, with the four special tokens
/// fixed at ids 0..=3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_tokens(SPECIALS.iter().map(|s| s.to_string()).collect())
            .expect("specials form a valid vocabulary")
    }
}

impl Vocab {
    /// Builds from message-response pairs, keeping tokens seen at least
    /// `min_freq` times.
    pub fn build<P: AsRef<str>, R: AsRef<str>>(pairs: &[(P, R)], min_freq: usize) -> Self {
        Self::build_capped(pairs, min_freq, DEFAULT_MAX_SIZE)
    }

    /// Like [`Vocab::build`] but keeps at most `max_size` ids in total.
    pub fn build_capped<P: AsRef<str>, R: AsRef<str>>(
        pairs: &[(P, R)],
        min_freq: usize,
        max_size: usize,
    ) -> Self {
        let min_freq = min_freq.max(1);
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for (p, r) in pairs {
            for tok in tokenize(p.as_ref()).into_iter().chain(tokenize(r.as_ref())) {
                if SPECIALS.contains(&tok.as_str()) {
                    continue;
                }
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> =
            counts.into_iter().filter(|(_, n)| *n >= min_freq).collect();
        // BTreeMap iteration is already token-ascending; a stable sort keeps it
        // as the tie-break.
        ranked.sort_by_key(|(_, n)| core::cmp::Reverse(*n));

        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let room = max_size.saturating_sub(tokens.len());
        tokens.extend(ranked.into_iter().take(room).map(|(t, _)| t));
        Self::from_tokens(tokens).expect("built vocabulary is valid")
    }

    /// Rebuilds from an id-ordered token list (as stored in a checkpoint).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        for (i, s) in SPECIALS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*s) {
                return Err(Error::VocabMismatch(format!(
                    "id {i} must be the special token {s}"
                )));
            }
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::VocabMismatch(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Token ids of `text`; out-of-vocabulary tokens become UNK.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text)
            .iter()
            .map(|t| self.id(t).unwrap_or(UNK))
            .collect()
    }

    /// Space-joined tokens up to (not including) the first EOS.
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut out = String::new();
        for &id in ids.iter().take_while(|&&id| id != EOS) {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(self.token(id).unwrap_or(SPECIALS[UNK]));
        }
        out
    }

    /// FNV-1a hash of the token list; identifies a vocabulary cheaply.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.tokens {
            for b in t.bytes().chain(core::iter::once(0)) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}
