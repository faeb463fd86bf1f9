//! Terminal chat loop.
//!
//! Reads a message, prints the K candidates numbered in display order, then
//! reads feedback: a number picks that candidate, other text becomes the
//! reply, a blank line skips. End of input or `/quit` ends the conversation.

use std::io::{self, BufRead, Write};

use nca_core::{Error as CoreError, Feedback, Session};

use crate::log::{LogError, LogWriter};

#[derive(Debug, thiserror::Error)]
pub enum ChatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Model(#[from] CoreError),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ChatOptions {
    /// Print each candidate's log-probability next to it.
    pub show_scores: bool,
}

fn read_line<R: BufRead>(input: &mut R) -> io::Result<Option<String>> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim_end_matches(['\n', '\r']).to_owned()))
}

fn prompt<W: Write>(out: &mut W, label: &str) -> io::Result<()> {
    write!(out, "{label}: ")?;
    out.flush()
}

/// Runs until input ends. A turn left without feedback at end of input is
/// not logged.
pub fn run<R: BufRead, W: Write>(
    session: &mut Session,
    mut input: R,
    mut out: W,
    mut log: Option<&mut LogWriter>,
    opts: ChatOptions,
) -> Result<(), ChatError> {
    loop {
        prompt(&mut out, "human")?;
        let Some(msg) = read_line(&mut input)? else {
            break;
        };
        let msg = msg.trim();
        if msg == "/quit" {
            break;
        }
        if msg.is_empty() {
            continue;
        }
        let view = match session.user_message(msg) {
            Ok(v) => v,
            Err(e @ CoreError::EmptyMessage) => {
                writeln!(out, "error: {e}")?;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for c in &view.candidates {
            let text = if c.text.is_empty() {
                "(empty)"
            } else {
                &c.text
            };
            if opts.show_scores {
                writeln!(out, "bot {}: {text}  ({:.3})", c.index, c.log_score)?;
            } else {
                writeln!(out, "bot {}: {text}", c.index)?;
            }
        }

        let result = loop {
            prompt(&mut out, "feedback")?;
            let Some(line) = read_line(&mut input)? else {
                return Ok(());
            };
            match session.apply_feedback(Feedback::parse(&line)) {
                Ok(r) => break r,
                Err(e @ (CoreError::SelectionOutOfRange { .. } | CoreError::EmptyReply)) => {
                    writeln!(out, "error: {e}")?
                }
                Err(e) => return Err(e.into()),
            }
        };
        match result.loss {
            Some(loss) => writeln!(
                out,
                "reply: {}  [updated, loss {loss:.4}]",
                result.chosen_response
            )?,
            None => writeln!(out, "reply: {}  [skipped]", result.chosen_response)?,
        }
        if let (Some(log), Some(record)) = (log.as_deref_mut(), session.transcript().last()) {
            log.append(record)?;
        }
    }
    Ok(())
}
