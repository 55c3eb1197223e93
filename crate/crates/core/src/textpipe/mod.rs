//! Text preprocessing: tokenization, BPE subword segmentation and
//! vocabularies.
//!
//! A [`Pipeline`] bundles the pieces a translation model needs on both
//! sides: raw text goes through [`Tokenizer::tokenize`], then
//! [`BpeModel::apply`], then [`Vocabulary::encode`]. Output IDs travel the
//! reverse path.

mod bpe;
mod tokenize;
mod vocab;

pub use bpe::{undo as bpe_undo, BpeModel, Undone, JOINER};
pub use tokenize::{Tokenizer, PUNCTUATION};
pub use vocab::{Vocabulary, BOS, EOS, PAD, RESERVED, UNK};

use alloc::string::String;
use alloc::vec::Vec;

/// Tokenizer, joint subword model, and per-side vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub tokenizer: Tokenizer,
    pub bpe: BpeModel,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
}

impl Pipeline {
    /// Trains a joint BPE model over both sides and builds vocabularies.
    pub fn train<S: AsRef<str>>(
        pairs: &[(S, S)],
        num_merges: usize,
    ) -> crate::Result<Self> {
        let tokenizer = Tokenizer::new();
        let src: Vec<Vec<String>> = pairs.iter().map(|(s, _)| tokenizer.tokenize(s.as_ref())).collect();
        let tgt: Vec<Vec<String>> = pairs.iter().map(|(_, t)| tokenizer.tokenize(t.as_ref())).collect();
        let mut joint = src.clone();
        joint.extend(tgt.iter().cloned());
        let bpe = BpeModel::train(&joint, num_merges)?;
        let src_pieces: Vec<Vec<String>> = src.iter().map(|t| bpe.apply(t)).collect();
        let tgt_pieces: Vec<Vec<String>> = tgt.iter().map(|t| bpe.apply(t)).collect();
        Ok(Pipeline {
            tokenizer,
            src_vocab: side_vocabulary(&src_pieces, &src),
            tgt_vocab: side_vocabulary(&tgt_pieces, &tgt),
            bpe,
        })
    }

    pub fn encode_source(&self, text: &str) -> Vec<usize> {
        let pieces = self.bpe.apply(&self.tokenizer.tokenize(text));
        self.src_vocab.encode(&restrict_to(&pieces, &self.src_vocab))
    }

    pub fn encode_target(&self, text: &str) -> Vec<usize> {
        let pieces = self.bpe.apply(&self.tokenizer.tokenize(text));
        self.tgt_vocab.encode(&restrict_to(&pieces, &self.tgt_vocab))
    }

    /// Target IDs back to display text.
    pub fn decode_target(&self, ids: &[usize]) -> String {
        let pieces = self.tgt_vocab.decode(ids);
        let tokens = bpe_undo(&pieces).tokens;
        self.tokenizer.detokenize(&tokens)
    }
}

/// Subword vocabulary of one side, extended with every character seen in
/// its tokens in both word-internal and word-final form.
fn side_vocabulary(pieces: &[Vec<String>], tokens: &[Vec<String>]) -> Vocabulary {
    let mut v = Vocabulary::build(pieces);
    let mut chars: Vec<char> = tokens.iter().flatten().flat_map(|t| t.chars()).collect();
    chars.sort_unstable();
    chars.dedup();
    let mut buf = [0u8; 4];
    for c in chars {
        let c = c.encode_utf8(&mut buf);
        v.insert(&alloc::format!("{c}{JOINER}"));
        v.insert(c);
    }
    v
}

/// Splits pieces missing from `vocab` back into single characters, keeping
/// the joiner convention so the word can still be reassembled.
pub fn restrict_to<S: AsRef<str>>(pieces: &[S], vocab: &Vocabulary) -> Vec<String> {
    let mut out = Vec::with_capacity(pieces.len());
    for p in pieces {
        let p = p.as_ref();
        if vocab.id(p).is_some() {
            out.push(String::from(p));
            continue;
        }
        let (body, joined) = match p.strip_suffix(JOINER) {
            Some(b) if !b.is_empty() => (b, true),
            _ => (p, false),
        };
        let n = body.chars().count();
        for (i, c) in body.chars().enumerate() {
            let mut piece = String::new();
            piece.push(c);
            if joined || i + 1 < n {
                piece.push_str(JOINER);
            }
            out.push(piece);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    #[test]
    fn pipeline_round_trips_training_text() {
        let pairs = [("the cat sleeps .", "le chat dort ."), ("the dog ( old ) .", "le chien ( vieux ) .")];
        let p = Pipeline::train(&pairs, 20).unwrap();
        let ids = p.encode_target("le chien dort .");
        assert!(!ids.contains(&UNK));
        assert_eq!(p.decode_target(&ids), "le chien dort.");
        assert!(p.encode_source("zzz").contains(&UNK));
    }

    #[test]
    fn words_unseen_on_one_side_fall_back_to_characters() {
        // "chien" is only a source word here, but its letters occur in
        // target text, so the target side can still spell it.
        let pairs = [("chien chien chien", "le chat ."), ("chien chien", "nice hen !")];
        let p = Pipeline::train(&pairs, 50).unwrap();
        let ids = p.encode_target("chien");
        assert!(!ids.contains(&UNK), "{ids:?}");
        assert_eq!(p.decode_target(&ids), "chien");
        let mut v = Vocabulary::default();
        v.insert("ab");
        assert_eq!(restrict_to(&["ab", "cd@@", "ef"], &v), ["ab", "c@@", "d@@", "e@@", "f"]);
    }

    fn normalized_text() -> impl Strategy<Value = String> {
        let word = "[a-zA-Z0-9éü]{1,6}";
        let item = prop_oneof![
            4 => word.prop_map(|w| (w, 0u8)),
            1 => prop::sample::select(alloc::vec![".", ",", ";", ":", "!", "?"]).prop_map(|p| (p.to_string(), 1u8)),
            1 => word.prop_map(|w| (w, 2u8)),
        ];
        prop::collection::vec(item, 0..12).prop_map(|items| {
            let t = Tokenizer::new();
            let mut toks: Vec<String> = Vec::new();
            for (w, kind) in items {
                match kind {
                    2 => {
                        toks.push("(".into());
                        toks.push(w);
                        toks.push(")".into());
                    }
                    _ => toks.push(w),
                }
            }
            t.detokenize(&toks)
        })
    }

    proptest! {
        #[test]
        fn detokenize_inverts_tokenize_on_normalized_text(s in normalized_text()) {
            let t = Tokenizer::new();
            let toks = t.tokenize(&s);
            prop_assert!(toks.iter().all(|x| !x.is_empty()));
            prop_assert_eq!(t.detokenize(&toks), s);
        }

        #[test]
        fn tokenize_is_idempotent_after_one_pass(s in "[ a-c.,;:!?\"()\t]{0,30}") {
            let t = Tokenizer::new();
            let once = t.detokenize(&t.tokenize(&s));
            prop_assert_eq!(t.tokenize(&once), t.tokenize(&s));
        }

        #[test]
        fn subword_round_trip_over_tokenized_text(
            train in prop::collection::vec("[a-f]{1,5}( [a-f]{1,5}){0,4}", 1..8),
            probe in "[a-f]{1,5}( [a-f]{1,5}){0,4}",
            merges in 0usize..30,
        ) {
            let t = Tokenizer::new();
            let corpus: Vec<Vec<String>> = train.iter().map(|s| t.tokenize(s)).collect();
            let m = BpeModel::train(&corpus, merges).unwrap();
            let toks = t.tokenize(&probe);
            prop_assert_eq!(bpe_undo(&m.apply(&toks)).tokens, toks);
        }
    }
}
