//! Translation quality metrics: corpus BLEU, TER with block shifts, and the
//! human-targeted variants that score MT output against its post-edit.

mod bleu;
mod ter;

pub use bleu::{bleu, corpus_stats, sentence_bleu, BleuStats, NGramProfile, MAX_ORDER};
pub use ter::{corpus_ter, edit_distance_only, ter, TerAlignment, MAX_SHIFT_SIZE};

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;

/// hTER of one segment: TER with the post-edit as reference.
pub fn hter<S: AsRef<str>>(mt_output: &[S], post_edit: &[S]) -> Result<f64> {
    Ok(ter(mt_output, post_edit)?.score)
}

/// hBLEU: corpus BLEU with the post-edits as references.
pub fn hbleu<S: AsRef<str>>(mt_outputs: &[Vec<S>], post_edits: &[Vec<S>]) -> Result<f64> {
    bleu(mt_outputs, post_edits)
}

/// Lowercases every token, for case-insensitive evaluation.
pub fn lowercase<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens.iter().map(|t| t.as_ref().to_lowercase()).collect()
}
