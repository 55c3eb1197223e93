use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::adaptation::{AdaptiveSession, ModelConfig};
use crate::error::{Error, Result};
use crate::metrics::{bleu, ter};
use crate::neuralmt::{train_batch, Arch, IdPair, NmtModel, TrainOptions};
use crate::textpipe::{Pipeline, Tokenizer};

/// Outcome of one simulated segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentResult {
    pub source: String,
    pub reference: String,
    /// Output produced before this segment's own update.
    pub hypothesis: String,
    /// TER edits against the reference (the post-edit stand-in).
    pub edits: usize,
    pub reference_length: usize,
    pub hter: f64,
    pub pre_loss: Option<f64>,
    pub post_loss: Option<f64>,
    pub update_seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSummary {
    /// Corpus BLEU against the references, 0–100.
    pub hbleu: f64,
    /// Corpus TER against the references, as a fraction.
    pub hter: f64,
    pub mean_update_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub config: ModelConfig,
    pub document: Vec<(String, String)>,
    pub ol_enabled: bool,
    pub results: Vec<SegmentResult>,
    pub summary: SimulationSummary,
    pub fingerprint_before: u64,
    pub fingerprint_after: u64,
}

/// Replays a document in order: translate each source, score it against
/// the reference, then (with online learning on) confirm the reference as
/// the post-edit.
pub fn run_simulation(
    session: &mut AdaptiveSession,
    document: &[(String, String)],
    ol_enabled: bool,
) -> Result<SimulationRun> {
    if document.is_empty() {
        return Err(Error::EmptySequence("document"));
    }
    let tokenizer = Tokenizer::new();
    let fingerprint_before = session.model().fingerprint();
    let mut results = Vec::with_capacity(document.len());
    let (mut hyps, mut refs) = (Vec::new(), Vec::new());
    for (index, (source, reference)) in document.iter().enumerate() {
        let at = |e: Error| Error::Segment {
            index,
            source: alloc::boxed::Box::new(e),
        };
        let t = session.translate_segment(source).map_err(at)?;
        let h = tokenizer.tokenize(&t.text);
        let r = tokenizer.tokenize(reference);
        let a = ter(&h, &r).map_err(at)?;
        let mut row = SegmentResult {
            source: source.clone(),
            reference: reference.clone(),
            hypothesis: t.text,
            edits: a.edits(),
            reference_length: a.reference_length,
            hter: a.score,
            pre_loss: None,
            post_loss: None,
            update_seconds: None,
        };
        if ol_enabled {
            let pair = session.pair_now(&(index + 1).to_string(), source, reference);
            let rep = session.confirm_and_update(pair).map_err(at)?;
            row.pre_loss = Some(rep.pre_loss);
            row.post_loss = Some(rep.post_loss);
            row.update_seconds = Some(rep.elapsed.as_secs_f64());
        }
        hyps.push(h);
        refs.push(r);
        results.push(row);
    }
    let edits: usize = results.iter().map(|r| r.edits).sum();
    let len: usize = results.iter().map(|r| r.reference_length).sum();
    let times: Vec<f64> = results.iter().filter_map(|r| r.update_seconds).collect();
    let summary = SimulationSummary {
        hbleu: bleu(&hyps, &refs)?,
        hter: edits as f64 / len as f64,
        mean_update_seconds: if times.is_empty() {
            0.0
        } else {
            times.iter().sum::<f64>() / times.len() as f64
        },
    };
    Ok(SimulationRun {
        config: session.config().clone(),
        document: document.to_vec(),
        ol_enabled,
        results,
        summary,
        fingerprint_before,
        fingerprint_after: session.model().fingerprint(),
    })
}

impl SimulationRun {
    /// Tab-separated per-segment rows followed by the summary line.
    pub fn report(&self) -> String {
        let mut out = String::from("index\thter\tpre_loss\tpost_loss\tupdate_s\tsource\thypothesis\treference\n");
        let opt = |v: Option<f64>, p: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.p$}"));
        for (i, r) in self.results.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{:.3}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                i + 1,
                r.hter,
                opt(r.pre_loss, 4),
                opt(r.post_loss, 4),
                opt(r.update_seconds, 4),
                r.source,
                r.hypothesis,
                r.reference
            ));
        }
        out.push_str(&format!(
            "hBLEU={:.1} hTER={:.3} mean_update_s={:.3}\n",
            self.summary.hbleu, self.summary.hter, self.summary.mean_update_seconds
        ));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub static_hter: f64,
    pub adaptive_hter: f64,
    /// Static minus adaptive; positive means online learning helped.
    pub delta_hter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Static minus adaptive corpus hTER, in points (0–100 scale).
    pub delta_hter: f64,
    /// Adaptive minus static corpus hBLEU, in points.
    pub delta_hbleu: f64,
    pub rows: Vec<ComparisonRow>,
    pub mean_update_seconds: f64,
    pub static_summary: SimulationSummary,
    pub adaptive_summary: SimulationSummary,
}

pub fn compare_runs(static_run: &SimulationRun, adaptive: &SimulationRun) -> Result<ComparisonReport> {
    if static_run.document != adaptive.document {
        return Err(Error::DocumentMismatch(format!(
            "{} vs {} segments or differing content",
            static_run.document.len(),
            adaptive.document.len()
        )));
    }
    if static_run.fingerprint_before != adaptive.fingerprint_before {
        return Err(Error::DocumentMismatch("runs start from different models".into()));
    }
    let rows = static_run
        .results
        .iter()
        .zip(&adaptive.results)
        .map(|(s, a)| ComparisonRow {
            static_hter: s.hter,
            adaptive_hter: a.hter,
            delta_hter: s.hter - a.hter,
        })
        .collect();
    Ok(ComparisonReport {
        delta_hter: 100.0 * (static_run.summary.hter - adaptive.summary.hter),
        delta_hbleu: adaptive.summary.hbleu - static_run.summary.hbleu,
        rows,
        mean_update_seconds: adaptive.summary.mean_update_seconds,
        static_summary: static_run.summary,
        adaptive_summary: adaptive.summary,
    })
}

impl ComparisonReport {
    /// One row per segment plus a summary row.
    pub fn table(&self) -> String {
        let mut out = String::from("segment\tstatic_hter\tadaptive_hter\tdelta_hter\n");
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{:.3}\t{:.3}\t{:.3}\n",
                i + 1,
                r.static_hter,
                r.adaptive_hter,
                r.delta_hter
            ));
        }
        out.push_str(&format!(
            "summary\t{:.3}\t{:.3}\t{:.3}\tdelta_hTER={:.1} delta_hBLEU={:.1} mean_update_s={:.3}\n",
            self.static_summary.hter,
            self.adaptive_summary.hter,
            self.static_summary.hter - self.adaptive_summary.hter,
            self.delta_hter,
            self.delta_hbleu,
            self.mean_update_seconds
        ));
        out
    }
}

/// Settings for building a baseline system from parallel text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainSpec {
    pub num_merges: usize,
    pub emb_dim: usize,
    pub hidden_dim: usize,
    pub seed: u64,
    pub train: TrainOptions,
}

impl Default for PretrainSpec {
    fn default() -> Self {
        PretrainSpec {
            num_merges: 400,
            emb_dim: 64,
            hidden_dim: 128,
            seed: 1,
            train: TrainOptions::default(),
        }
    }
}

/// Trains subwords, vocabularies and a model on `pairs`; returns them with
/// the per-epoch loss trace.
pub fn pretrain(pairs: &[(String, String)], spec: &PretrainSpec) -> Result<(Pipeline, NmtModel<f32>, Vec<f64>)> {
    let pipeline = Pipeline::train(pairs, spec.num_merges)?;
    let arch = Arch::new(pipeline.src_vocab.len(), pipeline.tgt_vocab.len()).with_dims(spec.emb_dim, spec.hidden_dim);
    let mut model = NmtModel::<f32>::new(arch, spec.seed)?;
    let ids: Vec<IdPair> = pairs
        .iter()
        .map(|(s, t)| IdPair {
            src: pipeline.encode_source(s),
            tgt: pipeline.encode_target(t),
        })
        .filter(|p| !p.src.is_empty() && !p.tgt.is_empty())
        .collect();
    let trace = train_batch(&mut model, &ids, &TrainOptions { seed: spec.seed, ..spec.train })?;
    Ok((pipeline, model, trace))
}
