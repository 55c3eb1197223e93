use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

/// N-gram counts of one token sequence for orders 1 through 4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramProfile<'a> {
    counts: [BTreeMap<&'a [&'a str], usize>; MAX_ORDER],
    len: usize,
}

impl<'a> NGramProfile<'a> {
    pub fn new(tokens: &'a [&'a str]) -> Self {
        let mut counts: [BTreeMap<&[&str], usize>; MAX_ORDER] = Default::default();
        for (n, table) in counts.iter_mut().enumerate() {
            for gram in tokens.windows(n + 1) {
                *table.entry(gram).or_default() += 1;
            }
        }
        NGramProfile {
            counts,
            len: tokens.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Total n-gram count of order `n` (1-based).
    pub fn total(&self, n: usize) -> usize {
        self.counts[n - 1].values().sum()
    }

    /// Matches of order `n` clipped by the reference counts.
    pub fn clipped_matches(&self, reference: &NGramProfile<'_>, n: usize) -> usize {
        self.counts[n - 1]
            .iter()
            .map(|(gram, &c)| c.min(reference.counts[n - 1].get(gram).copied().unwrap_or(0)))
            .sum()
    }
}

/// Sufficient statistics for corpus BLEU.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn of<S: AsRef<str>>(hypothesis: &[S], reference: &[S]) -> Self {
        let h: Vec<&str> = hypothesis.iter().map(AsRef::as_ref).collect();
        let r: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
        let (hp, rp) = (NGramProfile::new(&h), NGramProfile::new(&r));
        let mut s = BleuStats {
            hyp_len: h.len(),
            ref_len: r.len(),
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            s.matches[n - 1] = hp.clipped_matches(&rp, n);
            s.totals[n - 1] = hp.total(n);
        }
        s
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    fn brevity_penalty(&self) -> f64 {
        if self.hyp_len >= self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        }
    }

    /// Unsmoothed BLEU on a 0–100 scale.
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 0..MAX_ORDER {
            if self.matches[n] == 0 {
                return 0.0;
            }
            log_sum += (self.matches[n] as f64 / self.totals[n] as f64).ln();
        }
        100.0 * self.brevity_penalty() * (log_sum / MAX_ORDER as f64).exp()
    }

    /// Add-one smoothing on orders two and up; diagnostic sentence-level use.
    pub fn smoothed_score(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 0..MAX_ORDER {
            let (m, t) = if n == 0 {
                (self.matches[0] as f64, self.totals[0] as f64)
            } else {
                (self.matches[n] as f64 + 1.0, self.totals[n] as f64 + 1.0)
            };
            if m == 0.0 {
                return 0.0;
            }
            log_sum += (m / t).ln();
        }
        100.0 * self.brevity_penalty() * (log_sum / MAX_ORDER as f64).exp()
    }
}

/// Corpus BLEU: clipped n-gram precisions for n = 1..4, geometric mean,
/// brevity penalty, no smoothing. Scaled to 0–100.
pub fn bleu<S: AsRef<str>>(hypotheses: &[Vec<S>], references: &[Vec<S>]) -> Result<f64> {
    Ok(corpus_stats(hypotheses, references)?.score())
}

pub fn corpus_stats<S: AsRef<str>>(hypotheses: &[Vec<S>], references: &[Vec<S>]) -> Result<BleuStats> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            left: hypotheses.len(),
            right: references.len(),
        });
    }
    if references.is_empty() {
        return Err(Error::EmptyReference);
    }
    let mut total = BleuStats::default();
    for (h, r) in hypotheses.iter().zip(references) {
        total.add(&BleuStats::of(h, r));
    }
    Ok(total)
}

/// Smoothed single-sentence BLEU (labelled diagnostic; not corpus BLEU).
pub fn sentence_bleu<S: AsRef<str>>(hypothesis: &[S], reference: &[S]) -> f64 {
    BleuStats::of(hypothesis, reference).smoothed_score()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identical_corpus_scores_100() {
        let c = vec![vec!["a", "b", "c", "d", "e"], vec!["x", "y", "z", "w"]];
        assert!((bleu(&c, &c).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn empty_hypothesis_scores_zero() {
        assert_eq!(bleu(&[vec![]], &[vec!["a", "b"]]).unwrap(), 0.0);
    }

    #[test]
    fn repeated_word_is_clipped() {
        let hyp = vec!["the", "the", "the", "the"];
        let r = vec!["the", "cat"];
        let s = BleuStats::of(&hyp, &r);
        assert_eq!((s.matches[0], s.totals[0]), (1, 4));
        assert_eq!(&s.matches[1..], &[0, 0, 0]);
        assert_eq!(bleu(&[hyp], &[r]).unwrap(), 0.0);
    }

    #[test]
    fn hand_counted_value() {
        // Precisions 4/5, 3/4, 2/3, 1/2; brevity penalty exp(1 - 6/5).
        let hyp = vec!["a", "b", "c", "d", "x"];
        let r = vec!["a", "b", "c", "d", "y", "z"];
        let p = [4.0 / 5.0, 3.0 / 4.0, 2.0 / 3.0, 1.0 / 2.0f64];
        let geo = (p.iter().map(|x| x.ln()).sum::<f64>() / 4.0).exp();
        let bp = (1.0 - 6.0 / 5.0f64).exp();
        assert!((bleu(&[hyp], &[r]).unwrap() - 100.0 * bp * geo).abs() < 1e-9);
    }

    #[test]
    fn mismatched_lengths_error() {
        assert!(bleu(&[vec!["a"]], &[vec!["a"], vec!["b"]]).is_err());
        assert_eq!(bleu::<&str>(&[], &[]), Err(Error::EmptyReference));
    }

    #[test]
    fn smoothing_keeps_short_matches_positive() {
        let s = sentence_bleu(&["the", "cat"], &["the", "cat", "sat"]);
        assert!(s > 0.0 && s < 100.0);
        assert_eq!(sentence_bleu::<&str>(&[], &["a"]), 0.0);
    }
}
