use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Suffix marking a subword piece that continues into the next piece.
pub const JOINER: &str = "@@";

/// End-of-token sentinel used while counting and merging pairs.
const END: &str = "</w>";

/// Greedy byte-pair-encoding merge table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
}

/// Result of reversing a subword segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Undone {
    pub tokens: Vec<String>,
    /// The last piece still carried a joiner; it was kept as literal text.
    pub dangling_joiner: bool,
}

fn split_symbols(token: &str) -> Vec<String> {
    let mut symbols: Vec<String> = token.chars().map(|c| c.to_string()).collect();
    if let Some(last) = symbols.last_mut() {
        last.push_str(END);
    }
    symbols
}

fn merge_in_place(symbols: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < symbols.len() {
        if symbols[i] == left && symbols[i + 1] == right {
            let r = symbols.remove(i + 1);
            symbols[i].push_str(&r);
        }
        i += 1;
    }
}

impl BpeModel {
    pub fn from_merges(merges: Vec<(String, String)>) -> Self {
        BpeModel { merges }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn num_merges(&self) -> usize {
        self.merges.len()
    }

    /// Learns up to `num_merges` merges, most frequent pair first.
    ///
    /// Pairs are counted within tokens only. Ties go to the lexicographically
    /// smallest pair. Stops early once no pair occurs.
    pub fn train<S: AsRef<str>>(corpus: &[Vec<S>], num_merges: usize) -> Result<Self> {
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        for seq in corpus {
            for tok in seq {
                *freq.entry(tok.as_ref()).or_default() += 1;
            }
        }
        if freq.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut words: Vec<(Vec<String>, usize)> = freq
            .into_iter()
            .map(|(w, c)| (split_symbols(w), c))
            .collect();

        let mut merges = Vec::with_capacity(num_merges);
        for _ in 0..num_merges {
            let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
            for (symbols, count) in &words {
                for pair in symbols.windows(2) {
                    *counts.entry((pair[0].as_str(), pair[1].as_str())).or_default() += count;
                }
            }
            let mut best: Option<((&str, &str), usize)> = None;
            for (pair, count) in counts {
                if best.map_or(true, |(_, c)| count > c) {
                    best = Some((pair, count));
                }
            }
            let Some(((l, r), _)) = best else { break };
            let (l, r) = (l.to_string(), r.to_string());
            for (symbols, _) in &mut words {
                merge_in_place(symbols, &l, &r);
            }
            merges.push((l, r));
        }
        Ok(BpeModel { merges })
    }

    /// Segments one token into pieces; all but the last carry [`JOINER`].
    pub fn segment_token(&self, token: &str) -> Vec<String> {
        let mut symbols = split_symbols(token);
        for (l, r) in &self.merges {
            if symbols.len() < 2 {
                break;
            }
            merge_in_place(&mut symbols, l, r);
        }
        let n = symbols.len();
        symbols
            .into_iter()
            .enumerate()
            .map(|(i, mut s)| {
                if i + 1 == n {
                    if s.ends_with(END) {
                        s.truncate(s.len() - END.len());
                    }
                } else {
                    s.push_str(JOINER);
                }
                s
            })
            .collect()
    }

    pub fn apply<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<String> {
        tokens
            .iter()
            .flat_map(|t| self.segment_token(t.as_ref()))
            .collect()
    }

    /// Serializes to the `#bpe v1` text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("#bpe v1 {}\n", self.merges.len());
        for (l, r) in &self.merges {
            out.push_str(l);
            out.push(' ');
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let count: usize = header
            .strip_prefix("#bpe v1 ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("bad header `{header}`"),
            })?;
        let mut merges = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_string(), r.to_string()))
                }
                _ => {
                    return Err(Error::Parse {
                        line: i + 2,
                        message: format!("expected `<left> <right>`, got `{line}`"),
                    })
                }
            }
        }
        if merges.len() != count {
            return Err(Error::Parse {
                line: 1,
                message: format!("header announces {count} merges, found {}", merges.len()),
            });
        }
        Ok(BpeModel { merges })
    }
}

/// Concatenates subword pieces back into tokens, dropping joiners.
pub fn undo<S: AsRef<str>>(pieces: &[S]) -> Undone {
    let mut tokens = Vec::new();
    let mut pending = String::new();
    let mut open = false;
    for piece in pieces {
        let piece = piece.as_ref();
        if let Some(stem) = piece.strip_suffix(JOINER) {
            pending.push_str(stem);
            open = true;
        } else {
            pending.push_str(piece);
            tokens.push(core::mem::take(&mut pending));
            open = false;
        }
    }
    let dangling_joiner = open;
    if open {
        pending.push_str(JOINER);
        tokens.push(pending);
    }
    Undone {
        tokens,
        dangling_joiner,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn learns_most_frequent_pair_first() {
        let corpus = vec![s(&["low", "low", "lower"])];
        let m = BpeModel::train(&corpus, 1).unwrap();
        assert_eq!(m.merges(), &[("l".to_string(), "o".to_string())]);
        assert!(BpeModel::train(&corpus, 0).unwrap().merges().is_empty());
    }

    #[test]
    fn stops_when_no_pair_left() {
        let m = BpeModel::train(&[s(&["ab"])], 5).unwrap();
        assert!(m.num_merges() <= 1);
        assert_eq!(m.apply(&["ab"]), s(&["ab"]));
    }

    #[test]
    fn ties_break_lexicographically() {
        // Both pairs occur once.
        let m = BpeModel::train(&[s(&["xy", "ab"])], 1).unwrap();
        assert_eq!(m.merges()[0], ("a".to_string(), "b</w>".to_string()));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert_eq!(BpeModel::train::<&str>(&[], 3), Err(Error::EmptyCorpus));
        assert_eq!(BpeModel::train::<&str>(&[vec![]], 3), Err(Error::EmptyCorpus));
    }

    #[test]
    fn apply_examples() {
        let m = BpeModel::from_merges(vec![("l".into(), "o".into())]);
        assert_eq!(m.apply(&["lower"]), s(&["lo@@", "w@@", "e@@", "r"]));
        assert_eq!(BpeModel::default().apply(&["ab"]), s(&["a@@", "b"]));
        assert!(m.apply::<&str>(&[]).is_empty());
    }

    #[test]
    fn undo_examples() {
        assert_eq!(undo(&["un@@", "related"]).tokens, s(&["unrelated"]));
        assert_eq!(undo(&["a"]).tokens, s(&["a"]));
        assert_eq!(undo(&["lo@@", "w@@", "e@@", "r"]).tokens, s(&["lower"]));
        let d = undo(&["x", "a@@"]);
        assert!(d.dangling_joiner);
        assert_eq!(d.tokens, s(&["x", "a@@"]));
    }

    #[test]
    fn text_format_round_trip() {
        let corpus = vec![s(&["lower", "newest", "widest", "low"])];
        let m = BpeModel::train(&corpus, 6).unwrap();
        let text = m.to_text();
        assert!(text.starts_with("#bpe v1 6\n"));
        assert_eq!(BpeModel::from_text(&text).unwrap(), m);
        assert!(BpeModel::from_text("#bpe v1 2\na b\n").is_err());
        assert!(BpeModel::from_text("bpe\n").is_err());
    }

    proptest! {
        #[test]
        fn apply_then_undo_is_identity(
            corpus in prop::collection::vec("[a-e]{1,6}", 1..12),
            merges in 0usize..20,
            probe in prop::collection::vec("[a-e]{1,8}", 0..6),
        ) {
            let m = BpeModel::train(&[corpus], merges).unwrap();
            let pieces = m.apply(&probe);
            for p in &pieces[..pieces.len().saturating_sub(1)] {
                prop_assert!(!p.is_empty());
            }
            let back = undo(&pieces);
            prop_assert!(!back.dangling_joiner);
            prop_assert_eq!(back.tokens, probe);
        }

        #[test]
        fn each_merge_is_a_most_frequent_pair(corpus in prop::collection::vec("[a-c]{1,5}", 1..10)) {
            let m = BpeModel::train(&[corpus.clone()], 8).unwrap();
            let mut words: Vec<Vec<String>> = corpus.iter().map(|w| split_symbols(w)).collect();
            let mut last = usize::MAX;
            for (l, r) in m.merges() {
                let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
                for w in &words {
                    for p in w.windows(2) {
                        *counts.entry((p[0].clone(), p[1].clone())).or_default() += 1;
                    }
                }
                let max = counts.values().copied().max().unwrap();
                let chosen = counts[&(l.clone(), r.clone())];
                prop_assert_eq!(chosen, max);
                prop_assert!(chosen <= last);
                last = chosen;
                for w in &mut words {
                    merge_in_place(w, l, r);
                }
            }
        }
    }
}
