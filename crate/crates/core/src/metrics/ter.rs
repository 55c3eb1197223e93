use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Longest block considered for a shift.
pub const MAX_SHIFT_SIZE: usize = 10;

/// Edit counts of a TER alignment. Insertions and deletions are named from
/// the hypothesis' point of view: an insertion adds a missing reference word.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TerAlignment {
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
    pub shifts: usize,
    pub reference_length: usize,
    pub score: f64,
}

impl TerAlignment {
    pub fn edits(&self) -> usize {
        self.insertions + self.deletions + self.substitutions + self.shifts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Match,
    Sub,
    /// Drop a hypothesis word.
    Del,
    /// Add a reference word.
    Ins,
}

/// Levenshtein alignment between two id sequences, with a deterministic
/// backtrace (diagonal first, then deletion, then insertion).
fn align(hyp: &[u32], reference: &[u32]) -> (usize, Vec<Step>) {
    let (n, m) = (hyp.len(), reference.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + usize::from(hyp[i - 1] != reference[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = diag.min(del).min(ins);
        }
    }
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = hyp[i - 1] == reference[j - 1];
            if here == d[(i - 1) * w + j - 1] + usize::from(!same) {
                path.push(if same { Step::Match } else { Step::Sub });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == d[(i - 1) * w + j] + 1 {
            path.push(Step::Del);
            i -= 1;
        } else {
            path.push(Step::Ins);
            j -= 1;
        }
    }
    path.reverse();
    (d[n * w + m], path)
}

fn edit_distance(hyp: &[u32], reference: &[u32]) -> usize {
    let m = reference.len();
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; m + 1];
    for (i, &h) in hyp.iter().enumerate() {
        cur[0] = i + 1;
        for j in 1..=m {
            cur[j] = (prev[j - 1] + usize::from(h != reference[j - 1]))
                .min(prev[j] + 1)
                .min(cur[j - 1] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Moves `hyp[start..start + len]` so that it begins at index `dest` of the
/// sequence with the block removed.
pub(crate) fn shifted<T: Copy>(hyp: &[T], start: usize, len: usize, dest: usize) -> Vec<T> {
    let mut rest: Vec<T> = Vec::with_capacity(hyp.len());
    rest.extend_from_slice(&hyp[..start]);
    rest.extend_from_slice(&hyp[start + len..]);
    let mut out = Vec::with_capacity(hyp.len());
    out.extend_from_slice(&rest[..dest]);
    out.extend_from_slice(&hyp[start..start + len]);
    out.extend_from_slice(&rest[dest..]);
    out
}

fn intern<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> (Vec<u32>, Vec<u32>) {
    fn map<'a, S: AsRef<str>>(toks: &'a [S], ids: &mut BTreeMap<&'a str, u32>) -> Vec<u32> {
        toks.iter()
            .map(|t| {
                let next = ids.len() as u32;
                *ids.entry(t.as_ref()).or_insert(next)
            })
            .collect()
    }
    let mut ids = BTreeMap::new();
    let h = map(hyp, &mut ids);
    let r = map(reference, &mut ids);
    (h, r)
}

/// Picks the shift with the largest edit-distance reduction, if it pays for
/// its own unit cost. Ties: smallest block, then leftmost origin, then
/// leftmost destination.
fn best_shift(hyp: &[u32], reference: &[u32], current: usize) -> Option<(Vec<u32>, usize)> {
    let (_, path) = align(hyp, reference);
    let mut hyp_ok = vec![false; hyp.len()];
    let mut ref_ok = vec![false; reference.len()];
    let (mut i, mut j) = (0, 0);
    for step in path {
        match step {
            Step::Match => {
                hyp_ok[i] = true;
                ref_ok[j] = true;
                i += 1;
                j += 1;
            }
            Step::Sub => {
                i += 1;
                j += 1;
            }
            Step::Del => i += 1,
            Step::Ins => j += 1,
        }
    }

    let mut best: Option<(usize, Vec<u32>)> = None;
    for len in 1..=MAX_SHIFT_SIZE.min(hyp.len()) {
        for start in 0..=hyp.len() - len {
            let block = &hyp[start..start + len];
            if hyp_ok[start..start + len].iter().all(|&ok| ok) {
                continue;
            }
            let wanted = reference.len() >= len
                && (0..=reference.len() - len).any(|r| {
                    &reference[r..r + len] == block && !ref_ok[r..r + len].iter().all(|&ok| ok)
                });
            if !wanted {
                continue;
            }
            for dest in 0..=hyp.len() - len {
                if dest == start {
                    continue;
                }
                let candidate = shifted(hyp, start, len, dest);
                let ed = edit_distance(&candidate, reference);
                // Accept only when the total cost (edits + this shift) drops.
                if ed + 1 < current && best.as_ref().map_or(true, |(b, _)| ed < *b) {
                    best = Some((ed, candidate));
                }
            }
        }
    }
    best.map(|(ed, seq)| (seq, ed))
}

/// Translation edit rate with greedy block shifts.
pub fn ter<S: AsRef<str>>(hypothesis: &[S], reference: &[S]) -> Result<TerAlignment> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let (mut hyp, reference_ids) = intern(hypothesis, reference);
    let mut current = edit_distance(&hyp, &reference_ids);
    let mut shifts = 0;
    while let Some((next, ed)) = best_shift(&hyp, &reference_ids, current) {
        hyp = next;
        current = ed;
        shifts += 1;
    }
    let (_, path) = align(&hyp, &reference_ids);
    let mut a = TerAlignment {
        shifts,
        reference_length: reference.len(),
        ..Default::default()
    };
    for step in path {
        match step {
            Step::Match => {}
            Step::Sub => a.substitutions += 1,
            Step::Del => a.deletions += 1,
            Step::Ins => a.insertions += 1,
        }
    }
    a.score = a.edits() as f64 / a.reference_length as f64;
    Ok(a)
}

/// Word-level edit distance without shifts.
pub fn edit_distance_only<S: AsRef<str>>(hypothesis: &[S], reference: &[S]) -> usize {
    let (h, r) = intern(hypothesis, reference);
    edit_distance(&h, &r)
}

/// Corpus TER: total edits over total reference length.
pub fn corpus_ter<S: AsRef<str>>(hypotheses: &[Vec<S>], references: &[Vec<S>]) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            left: hypotheses.len(),
            right: references.len(),
        });
    }
    if references.is_empty() {
        return Err(Error::EmptyReference);
    }
    let (mut edits, mut len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        let a = ter(h, r)?;
        edits += a.edits();
        len += a.reference_length;
    }
    Ok(edits as f64 / len as f64)
}
