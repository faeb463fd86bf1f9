//! Append-only JSONL interaction logs and replay.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use nca_core::{replay_records, AdamState, InteractionRecord, Seq2SeqParams, Vocab};

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("replay failed: {0}")]
    Replay(#[from] nca_core::Error),
}

/// Appends one record per line, flushing after each.
#[derive(Debug)]
pub struct LogWriter {
    path: PathBuf,
    file: File,
}

impl LogWriter {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let path = path.as_ref().to_owned();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| LogError::Io {
                path: path.clone(),
                source,
            })?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &InteractionRecord) -> Result<(), LogError> {
        let mut line = serde_json::to_vec(record).expect("records always serialize");
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.flush())
            .map_err(|source| LogError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

/// The exact bytes a log holding `records` contains.
pub fn to_jsonl(records: &[InteractionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records always serialize"));
        out.push('\n');
    }
    out
}

/// Parses JSONL records; blank lines are ignored, anything else malformed is
/// an error naming its 1-based line.
pub fn parse_log(text: &str) -> Result<Vec<InteractionRecord>, LogError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| LogError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<InteractionRecord>, LogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LogError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_log(&text)
}

/// Re-applies a log's updates to `params`. `lr` replaces the logged rates.
pub fn replay(
    params: &mut Seq2SeqParams,
    vocab: &Vocab,
    log: impl AsRef<Path>,
    lr: Option<f64>,
) -> Result<AdamState, LogError> {
    let records = read_log(log)?;
    Ok(replay_records(params, vocab, &records, lr)?)
}
