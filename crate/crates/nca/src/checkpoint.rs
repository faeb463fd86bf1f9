//! `NCA1` checkpoint files.
//!
//! Layout: the magic bytes `NCA1`, a little-endian `u32` metadata length, that
//! many bytes of UTF-8 JSON metadata, then raw little-endian `f32` tensor data
//! in manifest order. Manifest offsets are byte offsets into the data section.
//!
//! The metadata holds the model dimensions, the vocabulary, the tensor
//! manifest, optional optimizer scalars and training provenance. Optimizer
//! moments are stored as extra tensors named `adam.m.*` and `adam.v.*`.
//! Encoding is canonical, so load followed by save reproduces the file byte
//! for byte.

use std::path::{Path, PathBuf};

use nca_core::model::{Hyper, PARAM_NAMES};
use nca_core::{AdamState, Seq2SeqParams, Tensor, Vocab};
use serde::{Deserialize, Serialize};

pub const MAGIC: [u8; 4] = *b"NCA1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: not an NCA1 checkpoint")]
    BadMagic,
    #[error("truncated checkpoint: needed {needed} bytes, found {found}")]
    Truncated { needed: u64, found: u64 },
    #[error("invalid checkpoint metadata: {0}")]
    Metadata(String),
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("hyperparameter mismatch: expected {expected:?}, checkpoint has {found:?}")]
    HyperparameterMismatch { expected: Hyper, found: Hyper },
}

/// Where a set of weights came from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Provenance {
    /// 0 untrained, 1 or 2 for the supervised phases.
    pub phase: u8,
    /// Epochs completed in `phase`.
    pub epoch: usize,
    pub epochs_a: usize,
    pub epochs_b: usize,
    pub seed: u64,
    /// SHA-256 of each training corpus file, phase order.
    pub corpus_sha256: Vec<String>,
    /// Online updates applied since the supervised phases.
    pub online_updates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: Seq2SeqParams,
    pub vocab: Vocab,
    pub adam: Option<AdamState>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Metadata {
    format_version: u32,
    hyper: Hyper,
    vocab: Vec<String>,
    tensors: Vec<Entry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adam: Option<AdamScalars>,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamScalars {
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

fn expected_names(with_adam: bool) -> Vec<String> {
    let mut names: Vec<String> = PARAM_NAMES.iter().map(|n| n.to_string()).collect();
    if with_adam {
        for prefix in ["adam.m.", "adam.v."] {
            names.extend(PARAM_NAMES.iter().map(|n| format!("{prefix}{n}")));
        }
    }
    names
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.to_owned(),
        source,
    }
}

impl Checkpoint {
    pub fn new(params: Seq2SeqParams, vocab: Vocab) -> Self {
        Self {
            params,
            vocab,
            adam: None,
            provenance: Provenance::default(),
        }
    }

    pub fn hyper(&self) -> Hyper {
        self.params.hyper()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors: Vec<&Tensor> = self.params.tensors().iter().collect();
        if let Some(adam) = &self.adam {
            tensors.extend(adam.m.iter());
            tensors.extend(adam.v.iter());
        }
        let mut offset = 0u64;
        let entries = expected_names(self.adam.is_some())
            .into_iter()
            .zip(&tensors)
            .map(|(name, t)| {
                let e = Entry {
                    name,
                    shape: t.shape().to_vec(),
                    offset,
                };
                offset += 4 * t.len() as u64;
                e
            })
            .collect();
        let meta = Metadata {
            format_version: FORMAT_VERSION,
            hyper: self.hyper(),
            vocab: self.vocab.tokens().to_vec(),
            tensors: entries,
            adam: self.adam.as_ref().map(|a| AdamScalars {
                t: a.t,
                lr: a.lr,
                beta1: a.beta1,
                beta2: a.beta2,
                eps: a.eps,
            }),
            provenance: self.provenance.clone(),
        };
        let json = serde_json::to_vec(&meta).expect("metadata always serializes");

        let mut out = Vec::with_capacity(8 + json.len() + offset as usize);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for t in tensors {
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let head = &bytes[..bytes.len().min(4)];
        if head != &MAGIC[..head.len()] {
            return Err(CheckpointError::BadMagic);
        }
        let truncated = |needed: usize| CheckpointError::Truncated {
            needed: needed as u64,
            found: bytes.len() as u64,
        };
        if bytes.len() < 8 {
            return Err(truncated(8));
        }
        let meta_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let data_start = 8 + meta_len;
        if bytes.len() < data_start {
            return Err(truncated(data_start));
        }
        let meta: Metadata = serde_json::from_slice(&bytes[8..data_start])
            .map_err(|e| CheckpointError::Metadata(e.to_string()))?;
        if meta.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Metadata(format!(
                "unsupported format version {}",
                meta.format_version
            )));
        }
        let mismatch = |m: String| CheckpointError::ManifestMismatch(m);

        let hyper = meta.hyper;
        let names = expected_names(meta.adam.is_some());
        if meta.tensors.len() != names.len() {
            return Err(mismatch(format!(
                "expected {} tensors, manifest lists {}",
                names.len(),
                meta.tensors.len()
            )));
        }
        let shapes = hyper.shapes();
        let mut offset = 0u64;
        for (i, (e, name)) in meta.tensors.iter().zip(&names).enumerate() {
            if &e.name != name {
                return Err(mismatch(format!(
                    "tensor {i} is {:?}, expected {name:?}",
                    e.name
                )));
            }
            let want = &shapes[i % shapes.len()];
            if &e.shape != want {
                return Err(mismatch(format!(
                    "{name} has shape {:?}, expected {want:?}",
                    e.shape
                )));
            }
            if e.offset != offset {
                return Err(mismatch(format!(
                    "{name} at offset {}, expected {offset}",
                    e.offset
                )));
            }
            offset += 4 * want.iter().product::<usize>() as u64;
        }
        let data = &bytes[data_start..];
        let needed = data_start as u64 + offset;
        if (data.len() as u64) < offset {
            return Err(CheckpointError::Truncated {
                needed,
                found: bytes.len() as u64,
            });
        }
        if data.len() as u64 > offset {
            return Err(mismatch(format!(
                "{} bytes of data beyond the manifest",
                data.len() as u64 - offset
            )));
        }
        if meta.vocab.len() != hyper.vocab_size {
            return Err(mismatch(format!(
                "vocabulary has {} tokens, model expects {}",
                meta.vocab.len(),
                hyper.vocab_size
            )));
        }
        let vocab = Vocab::from_tokens(meta.vocab).map_err(|e| mismatch(e.to_string()))?;

        let mut tensors = meta.tensors.iter().map(|e| {
            let start = e.offset as usize;
            let n: usize = e.shape.iter().product();
            let values = data[start..start + 4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Tensor::new(e.shape.clone(), values).expect("length checked against manifest")
        });
        let params_t: Vec<Tensor> = tensors.by_ref().take(shapes.len()).collect();
        let params =
            Seq2SeqParams::from_tensors(hyper, params_t).map_err(|e| mismatch(e.to_string()))?;
        let adam = meta.adam.map(|s| {
            let m: Vec<Tensor> = tensors.by_ref().take(shapes.len()).collect();
            let v: Vec<Tensor> = tensors.by_ref().take(shapes.len()).collect();
            AdamState {
                m,
                v,
                t: s.t,
                lr: s.lr,
                beta1: s.beta1,
                beta2: s.beta2,
                eps: s.eps,
            }
        });
        Ok(Self {
            params,
            vocab,
            adam,
            provenance: meta.provenance,
        })
    }

    /// Writes through a temporary file in the same directory, then renames.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let path = path.as_ref();
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        std::fs::write(&tmp, self.to_bytes()).map_err(io_err(&tmp))?;
        std::fs::rename(&tmp, path).map_err(io_err(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes)
    }

    /// Loads and rejects weights whose dimensions differ from `expected`.
    pub fn load_expecting(
        path: impl AsRef<Path>,
        expected: &Hyper,
    ) -> Result<Self, CheckpointError> {
        let ckpt = Self::load(path)?;
        if ckpt.hyper() != *expected {
            return Err(CheckpointError::HyperparameterMismatch {
                expected: *expected,
                found: ckpt.hyper(),
            });
        }
        Ok(ckpt)
    }
}
