use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::textpipe::Tokenizer;

/// Per-project adaptation settings, stored as `key: value` lines after a
/// `version: 1` header.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub project_id: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub tokenizer: String,
    pub bpe_model_path: String,
    pub learning_rate: f64,
    /// Gradient steps per confirmed segment.
    pub ol_iterations: usize,
    pub beam_size: usize,
    pub max_length: usize,
    pub checkpoint_path: String,
    /// Confirmations between automatic snapshots; 0 disables them.
    pub checkpoint_every: usize,
}

pub const CONFIG_VERSION: &str = "1";

const REQUIRED: [&str; 5] = ["project_id", "src_lang", "tgt_lang", "bpe_model_path", "checkpoint_path"];
const OPTIONAL: [&str; 6] = [
    "tokenizer",
    "learning_rate",
    "ol_iterations",
    "beam_size",
    "max_length",
    "checkpoint_every",
];

impl ModelConfig {
    /// Config with the documented defaults for every optional key.
    pub fn new(
        project_id: &str,
        src_lang: &str,
        tgt_lang: &str,
        bpe_model_path: &str,
        checkpoint_path: &str,
    ) -> Self {
        ModelConfig {
            project_id: project_id.into(),
            src_lang: src_lang.into(),
            tgt_lang: tgt_lang.into(),
            tokenizer: Tokenizer::SCHEME.into(),
            bpe_model_path: bpe_model_path.into(),
            learning_rate: 0.05,
            ol_iterations: 1,
            beam_size: 1,
            max_length: 100,
            checkpoint_path: checkpoint_path.into(),
            checkpoint_every: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::InvalidValue {
                key: key.into(),
                reason: reason.into(),
            })
        };
        for (key, v) in [
            ("project_id", &self.project_id),
            ("src_lang", &self.src_lang),
            ("tgt_lang", &self.tgt_lang),
            ("bpe_model_path", &self.bpe_model_path),
            ("checkpoint_path", &self.checkpoint_path),
        ] {
            if v.trim().is_empty() {
                return bad(key, "must not be empty");
            }
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate", "must be a positive number");
        }
        if self.ol_iterations == 0 {
            return bad("ol_iterations", "must be at least 1");
        }
        if self.beam_size == 0 {
            return bad("beam_size", "must be at least 1");
        }
        if self.max_length == 0 {
            return bad("max_length", "must be at least 1");
        }
        if self.tokenizer != Tokenizer::SCHEME {
            return bad("tokenizer", "unsupported tokenization scheme");
        }
        Ok(())
    }

    /// Parses and validates a config document. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        let mut version_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once(':').ok_or(Error::Parse {
                line: i + 1,
                message: "expected `key: value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !version_seen {
                if key != "version" {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: "first entry must be `version: 1`".into(),
                    });
                }
                if value != CONFIG_VERSION {
                    return Err(Error::InvalidValue {
                        key: "version".into(),
                        reason: format!("unsupported config version `{value}`"),
                    });
                }
                version_seen = true;
                continue;
            }
            if !REQUIRED.contains(&key) && !OPTIONAL.contains(&key) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("unknown key `{key}`"),
                });
            }
            if entries.iter().any(|(k, _, _)| k == key) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
            entries.push((key.into(), value.into(), i + 1));
        }
        if !version_seen {
            return Err(Error::MissingKey("version".into()));
        }
        let get = |key: &str| entries.iter().find(|(k, _, _)| k == key).map(|(_, v, _)| v.as_str());
        let required = |key: &str| get(key).map(String::from).ok_or_else(|| Error::MissingKey(key.into()));
        let mut cfg = ModelConfig::new(
            &required("project_id")?,
            &required("src_lang")?,
            &required("tgt_lang")?,
            &required("bpe_model_path")?,
            &required("checkpoint_path")?,
        );
        if let Some(v) = get("tokenizer") {
            cfg.tokenizer = v.into();
        }
        if let Some(v) = get("learning_rate") {
            cfg.learning_rate = v.parse().map_err(|_| invalid("learning_rate", v))?;
        }
        for (key, slot) in [
            ("ol_iterations", &mut cfg.ol_iterations),
            ("beam_size", &mut cfg.beam_size),
            ("max_length", &mut cfg.max_length),
            ("checkpoint_every", &mut cfg.checkpoint_every),
        ] {
            if let Some(v) = get(key) {
                *slot = v.parse().map_err(|_| invalid(key, v))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Renders every key; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        format!(
            "version: {CONFIG_VERSION}\n\
             project_id: {}\n\
             src_lang: {}\n\
             tgt_lang: {}\n\
             tokenizer: {}\n\
             bpe_model_path: {}\n\
             learning_rate: {:?}\n\
             ol_iterations: {}\n\
             beam_size: {}\n\
             max_length: {}\n\
             checkpoint_path: {}\n\
             checkpoint_every: {}\n",
            self.project_id,
            self.src_lang,
            self.tgt_lang,
            self.tokenizer,
            self.bpe_model_path,
            self.learning_rate,
            self.ol_iterations,
            self.beam_size,
            self.max_length,
            self.checkpoint_path,
            self.checkpoint_every,
        )
    }
}

fn invalid(key: &str, value: &str) -> Error {
    Error::InvalidValue {
        key: key.to_string(),
        reason: format!("cannot parse `{value}`"),
    }
}
