use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;

/// Surface forms of the four reserved entries, in index order.
pub const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

/// Bidirectional token/index map with four reserved leading entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_of: Vec<String>,
    id_of: BTreeMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let mut v = Vocabulary {
            token_of: Vec::new(),
            id_of: BTreeMap::new(),
        };
        for t in RESERVED {
            v.insert(t);
        }
        v
    }
}

impl Vocabulary {
    /// Builds a vocabulary from symbol sequences, ordered by descending
    /// frequency then by symbol.
    pub fn build<S: AsRef<str>>(sequences: &[Vec<S>]) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for seq in sequences {
            for s in seq {
                *counts.entry(s.as_ref()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut v = Vocabulary::default();
        for (tok, _) in ranked {
            v.insert(tok);
        }
        v
    }

    /// Adds a token if absent and returns its index.
    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&id) = self.id_of.get(token) {
            return id;
        }
        let id = self.token_of.len();
        self.token_of.push(token.to_string());
        self.id_of.insert(token.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.token_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_of.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.token_of.get(id).map(String::as_str)
    }

    /// Maps symbols to indices, sending unknown symbols to [`UNK`].
    pub fn encode<S: AsRef<str>>(&self, symbols: &[S]) -> Vec<usize> {
        symbols
            .iter()
            .map(|s| self.id(s.as_ref()).unwrap_or(UNK))
            .collect()
    }

    /// Maps indices back to symbols, skipping reserved entries other than UNK.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .filter(|&&i| i != PAD && i != BOS && i != EOS)
            .filter_map(|&i| self.token(i).map(ToString::to_string))
            .collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.token_of
    }

    /// One token per line; line number minus one is the index.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.token_of {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        for (i, r) in RESERVED.iter().enumerate() {
            if lines.get(i) != Some(r) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: alloc::format!("expected reserved token {r}"),
                });
            }
        }
        let mut v = Vocabulary::default();
        for (i, line) in lines.iter().enumerate().skip(RESERVED.len()) {
            if line.is_empty() || v.id(line).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: alloc::format!("empty or duplicate token `{line}`"),
                });
            }
            v.insert(line);
        }
        Ok(v)
    }
}
