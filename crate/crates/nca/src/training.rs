//! Two-phase supervised training from corpus files to checkpoints.

use std::path::{Path, PathBuf};

use nca_core::model::Hyper;
use nca_core::train::{two_phase, EncodedCorpus, EpochEvent, TwoPhaseConfig};
use nca_core::vocab::DEFAULT_MAX_SIZE;
use nca_core::{Seq2SeqParams, Vocab};
use sha2::{Digest, Sha256};

use crate::checkpoint::{Checkpoint, CheckpointError, Provenance};
use crate::corpus::{load_corpus, CorpusError, Format};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Model(#[from] nca_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct TrainJob {
    pub phase1: PathBuf,
    pub phase2: Option<PathBuf>,
    /// Format of both corpora; detected from the extension when `None`.
    pub format: Option<Format>,
    pub out: PathBuf,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub max_len: usize,
    pub min_freq: usize,
    pub max_vocab: usize,
    pub schedule: TwoPhaseConfig,
    /// Also write a checkpoint after every epoch, next to `out`.
    pub epoch_checkpoints: bool,
}

impl TrainJob {
    pub fn new(
        phase1: impl Into<PathBuf>,
        phase2: Option<PathBuf>,
        out: impl Into<PathBuf>,
    ) -> Self {
        let d = Hyper::desk(0);
        Self {
            phase1: phase1.into(),
            phase2,
            format: None,
            out: out.into(),
            embed_dim: d.embed_dim,
            hidden_dim: d.hidden_dim,
            max_len: d.max_len,
            min_freq: 1,
            max_vocab: DEFAULT_MAX_SIZE,
            schedule: TwoPhaseConfig::default(),
            epoch_checkpoints: true,
        }
    }
}

/// `model.nca` after epoch 3 of phase 1 is `model.p1e003.nca`.
pub fn epoch_checkpoint_path(out: &Path, phase: u8, epoch: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let ext = out.extension().and_then(|e| e.to_str()).unwrap_or("nca");
    out.with_file_name(format!("{stem}.p{phase}e{epoch:03}.{ext}"))
}

fn sha256_file(path: &Path) -> Result<String, TrainError> {
    let bytes = std::fs::read(path).map_err(|source| TrainError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Summary handed to the progress callback after each epoch.
#[derive(Debug, Clone, Copy)]
pub struct Progress {
    pub phase: u8,
    pub epoch: usize,
    pub mean_loss: f64,
    pub tokens: usize,
}

/// Loads the corpora, builds a joint vocabulary, trains both phases and
/// writes the final checkpoint (without optimizer state) to `job.out`.
pub fn run(job: &TrainJob, mut progress: impl FnMut(Progress)) -> Result<Checkpoint, TrainError> {
    let fmt = |p: &Path| job.format.unwrap_or_else(|| Format::from_path(p));
    let a = load_corpus(&job.phase1, fmt(&job.phase1))?;
    let b = match &job.phase2 {
        Some(p) => load_corpus(p, fmt(p))?,
        None => Default::default(),
    };
    for (path, c) in std::iter::once((&job.phase1, &a)).chain(job.phase2.iter().zip([&b])) {
        if c.malformed > 0 {
            tracing::warn!(
                "{}: skipped {} malformed lines",
                path.display(),
                c.malformed
            );
        }
    }

    let mut all = a.pairs.clone();
    all.extend(b.pairs.iter().cloned());
    let vocab = Vocab::build_capped(&all, job.min_freq, job.max_vocab);
    let ea = EncodedCorpus::encode(&vocab, &a.pairs);
    let eb = EncodedCorpus::encode(&vocab, &b.pairs);
    if ea.dropped + eb.dropped > 0 {
        tracing::warn!(
            "dropped {} pairs with an empty side",
            ea.dropped + eb.dropped
        );
    }

    let mut schedule = job.schedule;
    if job.phase2.is_none() {
        schedule.epochs_b = 0;
    }
    let mut hashes = vec![sha256_file(&job.phase1)?];
    if let Some(p) = &job.phase2 {
        hashes.push(sha256_file(p)?);
    }
    let provenance = |phase: u8, epoch: usize| Provenance {
        phase,
        epoch,
        epochs_a: schedule.epochs_a,
        epochs_b: schedule.epochs_b,
        seed: schedule.seed,
        corpus_sha256: hashes.clone(),
        online_updates: 0,
    };

    let hyper = Hyper {
        vocab_size: vocab.len(),
        embed_dim: job.embed_dim,
        hidden_dim: job.hidden_dim,
        max_len: job.max_len,
    };
    let init = Seq2SeqParams::init(hyper, schedule.seed);
    let mut last = (0u8, 0usize);
    let params = two_phase(init, &vocab, &ea, &eb, &schedule, |e: EpochEvent<'_>| {
        last = (e.phase, e.epoch);
        progress(Progress {
            phase: e.phase,
            epoch: e.epoch,
            mean_loss: e.stats.mean_loss,
            tokens: e.stats.tokens,
        });
        if job.epoch_checkpoints {
            let mut c = Checkpoint::new(e.params.clone(), vocab.clone());
            c.adam = Some(e.adam.clone());
            c.provenance = provenance(e.phase, e.epoch);
            c.save(epoch_checkpoint_path(&job.out, e.phase, e.epoch))
                .map_err(|err| err.to_string())?;
        }
        Ok(())
    })?;

    let mut ckpt = Checkpoint::new(params, vocab);
    ckpt.provenance = provenance(last.0, last.1);
    ckpt.save(&job.out)?;
    Ok(ckpt)
}
