//! Message-response corpora on disk.
//!
//! `jsonl`: one object per line with string fields `prompt` and `response`.
//! `tsv`: exactly two tab-separated columns. There is no quoting, so a field
//! containing a tab cannot be expressed and such lines count as malformed.
//! Blank lines are ignored in both formats.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Jsonl,
    Tsv,
}

impl Format {
    /// `.tsv` files are TSV, everything else JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("tsv") => Format::Tsv,
            _ => Format::Jsonl,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "tsv" => Ok(Format::Tsv),
            other => Err(format!(
                "unknown corpus format {other:?} (expected jsonl or tsv)"
            )),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Jsonl => "jsonl",
            Format::Tsv => "tsv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub pairs: Vec<(String, String)>,
    /// Non-blank lines that could not be parsed.
    pub malformed: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {malformed} of {lines} lines are malformed; is this really {format}?")]
    MostlyMalformed {
        path: PathBuf,
        format: Format,
        malformed: usize,
        lines: usize,
    },
}

#[derive(Deserialize)]
struct JsonPair {
    prompt: String,
    response: String,
}

fn parse_line(line: &str, format: Format) -> Option<(String, String)> {
    match format {
        Format::Jsonl => serde_json::from_str::<JsonPair>(line)
            .ok()
            .map(|p| (p.prompt, p.response)),
        Format::Tsv => {
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(p), Some(r), None) => Some((p.to_owned(), r.to_owned())),
                _ => None,
            }
        }
    }
}

/// Parses corpus text, skipping malformed lines. Returns the corpus and the
/// number of non-blank lines seen.
pub fn parse_corpus(text: &str, format: Format) -> (Corpus, usize) {
    let mut corpus = Corpus::default();
    let mut lines = 0;
    for line in text.lines() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        lines += 1;
        match parse_line(line, format) {
            Some(pair) => corpus.pairs.push(pair),
            None => corpus.malformed += 1,
        }
    }
    (corpus, lines)
}

/// Loads a corpus. Fails if the file is unreadable or more than half of its
/// lines are malformed.
pub fn load_corpus(path: impl AsRef<Path>, format: Format) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let (corpus, lines) = parse_corpus(&text, format);
    if corpus.malformed * 2 > lines {
        return Err(CorpusError::MostlyMalformed {
            path: path.to_owned(),
            format,
            malformed: corpus.malformed,
            lines,
        });
    }
    Ok(corpus)
}
