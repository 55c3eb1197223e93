use alloc::vec::Vec;

use super::autodiff::{log_sum_exp, Graph};
use super::model::{DecoderState, NmtModel};
use super::tensor::Real;
use crate::error::{Error, Result};
use crate::textpipe::{BOS, EOS, PAD};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeOptions {
    pub beam_size: usize,
    /// Cap on emitted tokens, EOS excluded.
    pub max_length: usize,
    /// Exponent of the `((5 + len) / 6)` length normalizer; 0 disables it.
    pub length_penalty: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            beam_size: 1,
            max_length: 100,
            length_penalty: 0.0,
        }
    }
}

impl DecodeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 || self.max_length == 0 {
            return Err(Error::InvalidArgument(
                "beam_size and max_length must be at least 1".into(),
            ));
        }
        if !(self.length_penalty >= 0.0) {
            return Err(Error::InvalidArgument("length_penalty must be >= 0".into()));
        }
        Ok(())
    }

    fn normalizer(&self, len: usize) -> f64 {
        if self.length_penalty == 0.0 {
            1.0
        } else {
            num_traits::Float::powf((5.0 + len as f64) / 6.0, self.length_penalty)
        }
    }

    /// Length-penalized score of a summed log-probability over `len` scored
    /// tokens.
    pub fn score(&self, log_prob: f64, len: usize) -> f64 {
        log_prob / self.normalizer(len)
    }
}

/// A finished decoding result.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Emitted tokens without BOS/EOS.
    pub tokens: Vec<usize>,
    /// Sum of token log-probabilities, EOS included when it was emitted.
    pub log_prob: f64,
    pub score: f64,
}

fn log_probs<T: Real>(logits: &[T]) -> Vec<f64> {
    let z: Vec<f64> = logits.iter().map(|x| x.as_f64()).collect();
    let lse = log_sum_exp(&z);
    z.into_iter().map(|x| x - lse).collect()
}

fn allowed(tok: usize) -> bool {
    tok != PAD && tok != BOS
}

struct Active {
    tokens: Vec<usize>,
    log_prob: f64,
    state: DecoderState,
}

/// Beam search (greedy when `beam_size == 1`); returns the best target IDs.
pub fn decode<T: Real>(model: &NmtModel<T>, src: &[usize], opts: &DecodeOptions) -> Result<Vec<usize>> {
    Ok(decode_best(model, src, opts)?.tokens)
}

pub fn decode_best<T: Real>(
    model: &NmtModel<T>,
    src: &[usize],
    opts: &DecodeOptions,
) -> Result<Hypothesis> {
    opts.validate()?;
    let greedy = greedy(model, src, opts)?;
    if opts.beam_size == 1 {
        return Ok(greedy);
    }
    let beam = beam(model, src, opts)?;
    // The greedy path competes as a candidate, so the result never scores
    // below it.
    Ok(match beam {
        Some(b) if b.score >= greedy.score => b,
        _ => greedy,
    })
}

fn greedy<T: Real>(model: &NmtModel<T>, src: &[usize], opts: &DecodeOptions) -> Result<Hypothesis> {
    let mut g = Graph::new(model.params());
    let enc = model.encode(&mut g, src)?;
    let mut state = enc.init;
    let mut prev = BOS;
    let mut tokens = Vec::new();
    let mut log_prob = 0.0;
    let mut scored = 0;
    while tokens.len() < opts.max_length {
        let (next, logits) = model.step(&mut g, &enc, state, prev);
        let lp = log_probs(g.value(logits));
        check(&lp)?;
        let (best, best_lp) = lp
            .iter()
            .enumerate()
            .filter(|(t, _)| allowed(*t))
            .fold((EOS, f64::NEG_INFINITY), |acc, (t, &v)| if v > acc.1 { (t, v) } else { acc });
        log_prob += best_lp;
        scored += 1;
        if best == EOS {
            break;
        }
        tokens.push(best);
        state = next;
        prev = best;
    }
    Ok(Hypothesis {
        score: opts.score(log_prob, scored),
        tokens,
        log_prob,
    })
}

fn check(lp: &[f64]) -> Result<()> {
    if lp.iter().any(|x| x.is_nan()) {
        return Err(Error::Numeric("non-finite logits during decoding".into()));
    }
    Ok(())
}

fn beam<T: Real>(model: &NmtModel<T>, src: &[usize], opts: &DecodeOptions) -> Result<Option<Hypothesis>> {
    let k = opts.beam_size;
    let mut g = Graph::new(model.params());
    let enc = model.encode(&mut g, src)?;
    let mut active = alloc::vec![Active {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: enc.init,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let best_finished = |f: &[Hypothesis]| f.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);

    while !active.is_empty() {
        // Candidates: (parent, token, log_prob); EOS extensions finish.
        let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
        let mut states = Vec::with_capacity(active.len());
        for (a, hyp) in active.iter().enumerate() {
            let prev = hyp.tokens.last().copied().unwrap_or(BOS);
            let (next, logits) = model.step(&mut g, &enc, hyp.state, prev);
            states.push(next);
            let lp = log_probs(g.value(logits));
            check(&lp)?;
            let eos_total = hyp.log_prob + lp[EOS];
            finished.push(Hypothesis {
                tokens: hyp.tokens.clone(),
                log_prob: eos_total,
                score: opts.score(eos_total, hyp.tokens.len() + 1),
            });
            for (t, &v) in lp.iter().enumerate() {
                if allowed(t) && t != EOS {
                    candidates.push((a, t, hyp.log_prob + v));
                }
            }
        }
        candidates.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
        candidates.truncate(k);
        let mut next_active = Vec::with_capacity(k);
        for (a, t, lp) in candidates {
            let mut tokens = active[a].tokens.clone();
            tokens.push(t);
            if tokens.len() >= opts.max_length {
                let n = tokens.len();
                finished.push(Hypothesis {
                    tokens,
                    log_prob: lp,
                    score: opts.score(lp, n),
                });
            } else {
                next_active.push(Active {
                    tokens,
                    log_prob: lp,
                    state: states[a],
                });
            }
        }
        active = next_active;
        // Log-probabilities only fall, so no active hypothesis can beat
        // its current sum normalized at the longest possible length.
        if finished.len() >= k {
            let bound = active
                .iter()
                .map(|h| opts.score(h.log_prob, opts.max_length + 1))
                .fold(f64::NEG_INFINITY, f64::max);
            if best_finished(&finished) >= bound {
                break;
            }
        }
    }
    Ok(finished
        .into_iter()
        .reduce(|best, h| if h.score > best.score { h } else { best }))
}
