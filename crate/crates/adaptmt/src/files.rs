//! Reading and writing the plain-text artifacts: configs, subword models,
//! vocabularies and TSV documents.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use adaptmt_core::adaptation::ModelConfig;
use adaptmt_core::textpipe::{BpeModel, Vocabulary};

use crate::error::{io_err, Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Writes through a temporary sibling file and renames it into place, so
/// readers never see a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Loads and validates a project config.
pub fn load_config(path: &Path) -> Result<ModelConfig> {
    Ok(ModelConfig::parse(&read_text(path)?)?)
}

pub fn save_config(config: &ModelConfig, path: &Path) -> Result<()> {
    write_atomic(path, config.serialize().as_bytes())
}

/// Resolves a path from a config relative to the config file's directory.
pub fn resolve(config_path: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        return p.to_path_buf();
    }
    config_path.parent().unwrap_or(Path::new(".")).join(p)
}

pub fn load_bpe(path: &Path) -> Result<BpeModel> {
    Ok(BpeModel::from_text(&read_text(path)?)?)
}

pub fn save_bpe(bpe: &BpeModel, path: &Path) -> Result<()> {
    write_atomic(path, bpe.to_text().as_bytes())
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary> {
    Ok(Vocabulary::from_text(&read_text(path)?)?)
}

pub fn save_vocab(vocab: &Vocabulary, path: &Path) -> Result<()> {
    write_atomic(path, vocab.to_text().as_bytes())
}

/// Parallel document: one `source<TAB>reference` pair per line.
pub fn load_tsv_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_text(path)?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (s, r) = line.split_once('\t').ok_or_else(|| {
            Error::Invalid(format!("{}:{}: expected `source<TAB>reference`", path.display(), i + 1))
        })?;
        pairs.push((s.to_string(), r.to_string()));
    }
    Ok(pairs)
}

pub fn save_tsv_pairs(pairs: &[(String, String)], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (s, r) in pairs {
        if s.contains(['\t', '\n']) || r.contains(['\t', '\n']) {
            return Err(Error::Invalid("segments must not contain tabs or newlines".into()));
        }
        out.push_str(&format!("{s}\t{r}\n"));
    }
    write_atomic(path, out.as_bytes())
}

/// One segment per line.
pub fn load_lines(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?.lines().map(str::to_string).collect())
}
