//! Model checkpoints: a version line, one line of JSON metadata, the
//! parameters as little-endian `f64`, and a SHA-256 trailer over everything
//! before it. Vocabularies are stored as sibling text files referenced from
//! the metadata.

use std::path::{Path, PathBuf};

use adaptmt_core::adaptation::{AdaptiveSession, ModelConfig, TrainingPair, UpdateRecord};
use adaptmt_core::neuralmt::{Arch, NmtModel, ParamSet, Tensor, ARCH_KIND};
use adaptmt_core::textpipe::{Pipeline, Tokenizer};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::files::{load_bpe, load_vocab, read_text, resolve, save_vocab, write_atomic};

pub const CHECKPOINT_VERSION: &str = "adaptmt-ckpt-v1";
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArchMeta {
    kind: String,
    emb_dim: usize,
    hidden_dim: usize,
    layers: usize,
    heads: usize,
    src_vocab: usize,
    tgt_vocab: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LogEntry {
    segment_id: String,
    timestamp_ms: u64,
    source: String,
    post_edit: String,
    pre_loss: f64,
    post_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Meta {
    arch: ArchMeta,
    rng_seed: u64,
    src_vocab: String,
    tgt_vocab: String,
    updates_applied: u64,
    update_log: Vec<LogEntry>,
    params: Vec<ParamMeta>,
}

/// Decoded checkpoint contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch: Arch,
    pub rng_seed: u64,
    pub params: ParamSet<f64>,
    /// Vocabulary file names, relative to the checkpoint's directory.
    pub src_vocab_ref: String,
    pub tgt_vocab_ref: String,
    pub update_log: Vec<UpdateRecord>,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let meta = Meta {
            arch: ArchMeta {
                kind: ARCH_KIND.into(),
                emb_dim: self.arch.emb_dim,
                hidden_dim: self.arch.hidden_dim,
                layers: self.arch.layers,
                heads: self.arch.heads,
                src_vocab: self.arch.src_vocab,
                tgt_vocab: self.arch.tgt_vocab,
            },
            rng_seed: self.rng_seed,
            src_vocab: self.src_vocab_ref.clone(),
            tgt_vocab: self.tgt_vocab_ref.clone(),
            updates_applied: self.update_log.len() as u64,
            update_log: self
                .update_log
                .iter()
                .map(|r| LogEntry {
                    segment_id: r.pair.segment_id.clone(),
                    timestamp_ms: r.pair.timestamp_ms,
                    source: r.pair.source.clone(),
                    post_edit: r.pair.post_edit.clone(),
                    pre_loss: r.pre_loss,
                    post_loss: r.post_loss,
                })
                .collect(),
            params: self
                .params
                .iter()
                .map(|(n, t)| ParamMeta {
                    name: n.into(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let mut out = Vec::with_capacity(self.params.num_values() * 8 + 4096);
        out.extend_from_slice(CHECKPOINT_VERSION.as_bytes());
        out.push(b'\n');
        out.extend_from_slice(serde_json::to_string(&meta).expect("metadata serializes").as_bytes());
        out.push(b'\n');
        for t in self.params.tensors() {
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.into());
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| corrupt("missing header"))?;
        let header = String::from_utf8_lossy(&bytes[..nl]);
        if header != CHECKPOINT_VERSION {
            return Err(if header.starts_with("adaptmt-ckpt-") {
                Error::IncompatibleCheckpoint(format!("found `{header}`, expected `{CHECKPOINT_VERSION}`"))
            } else {
                corrupt("not a checkpoint file")
            });
        }
        if bytes.len() < nl + 1 + DIGEST_LEN {
            return Err(corrupt("truncated"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch"));
        }
        let rest = &body[nl + 1..];
        let nl2 = rest.iter().position(|&b| b == b'\n').ok_or_else(|| corrupt("missing metadata"))?;
        let meta: Meta = serde_json::from_slice(&rest[..nl2]).map_err(|e| corrupt(&format!("metadata: {e}")))?;
        if meta.arch.kind != ARCH_KIND {
            return Err(Error::IncompatibleCheckpoint(format!("architecture `{}`", meta.arch.kind)));
        }
        if meta.updates_applied != meta.update_log.len() as u64 {
            return Err(corrupt("update counter disagrees with the update log"));
        }
        let mut data = &rest[nl2 + 1..];
        let mut params = ParamSet::new();
        for p in &meta.params {
            let n: usize = p.shape.iter().product();
            if data.len() < n * 8 {
                return Err(corrupt("parameter data truncated"));
            }
            let values = data[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            data = &data[n * 8..];
            params.push(&p.name, Tensor::from_vec(&p.shape, values)?);
        }
        if !data.is_empty() {
            return Err(corrupt("trailing parameter data"));
        }
        let a = &meta.arch;
        let arch = Arch {
            emb_dim: a.emb_dim,
            hidden_dim: a.hidden_dim,
            layers: a.layers,
            heads: a.heads,
            src_vocab: a.src_vocab,
            tgt_vocab: a.tgt_vocab,
        };
        Ok(Checkpoint {
            arch,
            rng_seed: meta.rng_seed,
            params,
            src_vocab_ref: meta.src_vocab,
            tgt_vocab_ref: meta.tgt_vocab,
            update_log: meta
                .update_log
                .into_iter()
                .map(|e| UpdateRecord {
                    pair: TrainingPair::new(&e.segment_id, &e.source, &e.post_edit, e.timestamp_ms),
                    pre_loss: e.pre_loss,
                    post_loss: e.post_loss,
                })
                .collect(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(crate::error::io_err(path))?;
        Self::decode(&bytes)
    }
}

fn vocab_refs(path: &Path) -> (String, String) {
    let name = path.file_name().map_or_else(|| "model".into(), |n| n.to_string_lossy().into_owned());
    (format!("{name}.src.vocab"), format!("{name}.tgt.vocab"))
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

/// Writes a model, its vocabularies and an update log to `path`.
pub fn save_model(
    model: &NmtModel<f32>,
    pipeline: &Pipeline,
    update_log: &[UpdateRecord],
    path: &Path,
) -> Result<PathBuf> {
    let (src_ref, tgt_ref) = vocab_refs(path);
    save_vocab(&pipeline.src_vocab, &sibling(path, &src_ref))?;
    save_vocab(&pipeline.tgt_vocab, &sibling(path, &tgt_ref))?;
    let ckpt = Checkpoint {
        arch: *model.arch(),
        rng_seed: model.rng_seed(),
        params: model.cast::<f64>().params().clone(),
        src_vocab_ref: src_ref,
        tgt_vocab_ref: tgt_ref,
        update_log: update_log.to_vec(),
    };
    write_atomic(path, &ckpt.encode())?;
    Ok(path.to_path_buf())
}

/// Snapshot of a session to `path`.
pub fn checkpoint(session: &AdaptiveSession, path: &Path) -> Result<PathBuf> {
    save_model(session.model(), session.pipeline(), session.update_log(), path)
}

/// Rebuilds a session from a checkpoint and the subword model at `bpe_path`.
pub fn restore(path: &Path, config: ModelConfig, bpe_path: &Path) -> Result<AdaptiveSession> {
    let ckpt = Checkpoint::read(path)?;
    let pipeline = Pipeline {
        tokenizer: Tokenizer::new(),
        bpe: load_bpe(bpe_path)?,
        src_vocab: load_vocab(&sibling(path, &ckpt.src_vocab_ref))?,
        tgt_vocab: load_vocab(&sibling(path, &ckpt.tgt_vocab_ref))?,
    };
    let model = NmtModel::<f64>::from_params(ckpt.arch, ckpt.params, ckpt.rng_seed)?.cast::<f32>();
    Ok(AdaptiveSession::with_history(model, pipeline, config, ckpt.update_log)?)
}

/// Files of a project, resolved against its config file's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectPaths {
    pub config: PathBuf,
    pub bpe: PathBuf,
    pub checkpoint: PathBuf,
}

impl ProjectPaths {
    pub fn of(config_path: &Path, config: &ModelConfig) -> Self {
        ProjectPaths {
            config: config_path.to_path_buf(),
            bpe: resolve(config_path, &config.bpe_model_path),
            checkpoint: resolve(config_path, &config.checkpoint_path),
        }
    }
}

/// Loads a project's config and restores its latest checkpoint.
pub fn open_project(config_path: &Path) -> Result<(AdaptiveSession, ProjectPaths)> {
    let config = ModelConfig::parse(&read_text(config_path)?)?;
    let paths = ProjectPaths::of(config_path, &config);
    let session = restore(&paths.checkpoint, config, &paths.bpe)?;
    Ok((session, paths))
}

/// Update count and last confirmation time from a checkpoint's metadata,
/// without loading the parameters.
pub fn read_progress(path: &Path) -> Result<(u64, Option<u64>)> {
    use std::io::{BufRead, BufReader};
    let f = std::fs::File::open(path).map_err(crate::error::io_err(path))?;
    let mut r = BufReader::new(f);
    let mut header = String::new();
    r.read_line(&mut header).map_err(crate::error::io_err(path))?;
    if header.trim_end() != CHECKPOINT_VERSION {
        return Err(Error::IncompatibleCheckpoint(header.trim_end().to_string()));
    }
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line).map_err(crate::error::io_err(path))?;
    let meta: Meta =
        serde_json::from_slice(&line).map_err(|e| Error::CorruptCheckpoint(format!("metadata: {e}")))?;
    Ok((meta.updates_applied, meta.update_log.last().map(|e| e.timestamp_ms)))
}
