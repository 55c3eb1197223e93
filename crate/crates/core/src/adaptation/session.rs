use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::neuralmt::tensor::Fnv;
use crate::neuralmt::{decode, sgd_step, DecodeOptions, NmtModel, CLIP_NORM};
use crate::textpipe::Pipeline;

/// Time source for update timestamps and durations.
pub trait Clock: Send + Sync {
    /// Wall-clock time as UTC epoch milliseconds.
    fn now_ms(&self) -> u64;
    /// Monotonic reading in nanoseconds, for measuring durations.
    fn monotonic_ns(&self) -> u64;
}

/// A clock that never advances.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrozenClock(pub u64);

impl Clock for FrozenClock {
    fn now_ms(&self) -> u64 {
        self.0
    }

    fn monotonic_ns(&self) -> u64 {
        0
    }
}

/// One (source, post-edit) pair confirmed by the translator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub source: String,
    pub post_edit: String,
    pub segment_id: String,
    /// UTC epoch milliseconds of the confirmation.
    pub timestamp_ms: u64,
}

impl TrainingPair {
    pub fn new(segment_id: &str, source: &str, post_edit: &str, timestamp_ms: u64) -> Self {
        TrainingPair {
            source: source.into(),
            post_edit: post_edit.into(),
            segment_id: segment_id.into(),
            timestamp_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    pub pair: TrainingPair,
    pub pre_loss: f64,
    pub post_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    /// Loss on the pair before the first gradient step.
    pub pre_loss: f64,
    /// Loss on the pair re-evaluated after the last step.
    pub post_loss: f64,
    pub steps: usize,
    pub elapsed: Duration,
    /// Counter value after this update.
    pub updates_applied: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation {
    pub text: String,
    pub hypothesis_id: String,
    /// Number of updates the model had absorbed when decoding.
    pub updates_seen: u64,
}

/// Hypotheses keyed by id, kept so post-edits can later be scored against
/// what the engine actually produced.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HypothesisLog {
    entries: BTreeMap<String, (String, String)>,
}

impl HypothesisLog {
    pub fn record(&mut self, t: &Translation, source: &str) {
        self.entries
            .insert(t.hypothesis_id.clone(), (String::from(source), t.text.clone()));
    }

    /// `(source, hypothesis)` recorded under `id`.
    pub fn get(&self, id: &str) -> Option<(&str, &str)> {
        self.entries.get(id).map(|(s, h)| (s.as_str(), h.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A project's model plus everything needed to translate and learn from
/// confirmed post-edits.
#[derive(Clone)]
pub struct AdaptiveSession {
    model: NmtModel<f32>,
    pipeline: Pipeline,
    config: ModelConfig,
    update_log: Vec<UpdateRecord>,
    clock: Arc<dyn Clock>,
}

impl fmt::Debug for AdaptiveSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdaptiveSession")
            .field("project_id", &self.config.project_id)
            .field("updates_applied", &self.updates_applied())
            .field("fingerprint", &self.model.fingerprint())
            .finish()
    }
}

impl AdaptiveSession {
    pub fn new(model: NmtModel<f32>, pipeline: Pipeline, config: ModelConfig) -> Result<Self> {
        Self::with_history(model, pipeline, config, Vec::new())
    }

    /// Resumes a session whose model already absorbed `update_log`.
    pub fn with_history(
        model: NmtModel<f32>,
        pipeline: Pipeline,
        config: ModelConfig,
        update_log: Vec<UpdateRecord>,
    ) -> Result<Self> {
        config.validate()?;
        let arch = model.arch();
        if arch.src_vocab != pipeline.src_vocab.len() || arch.tgt_vocab != pipeline.tgt_vocab.len() {
            return Err(Error::InvalidArgument(format!(
                "model vocabularies ({}, {}) do not match pipeline ({}, {})",
                arch.src_vocab,
                arch.tgt_vocab,
                pipeline.src_vocab.len(),
                pipeline.tgt_vocab.len()
            )));
        }
        Ok(AdaptiveSession {
            model,
            pipeline,
            config,
            update_log,
            clock: Arc::new(FrozenClock(0)),
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn model(&self) -> &NmtModel<f32> {
        &self.model
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn update_log(&self) -> &[UpdateRecord] {
        &self.update_log
    }

    pub fn updates_applied(&self) -> u64 {
        self.update_log.len() as u64
    }

    /// Timestamp of the most recent confirmation, if any.
    pub fn last_update_ms(&self) -> Option<u64> {
        self.update_log.last().map(|r| r.pair.timestamp_ms)
    }

    pub fn decode_options(&self) -> DecodeOptions {
        DecodeOptions {
            beam_size: self.config.beam_size,
            max_length: self.config.max_length,
            length_penalty: 0.0,
        }
    }

    /// Whether the automatic snapshot interval has just elapsed.
    pub fn checkpoint_due(&self) -> bool {
        let every = self.config.checkpoint_every as u64;
        every > 0 && self.updates_applied() > 0 && self.updates_applied() % every == 0
    }

    /// tokenize → subwords → decode → join subwords → detokenize.
    pub fn translate_segment(&self, source: &str) -> Result<Translation> {
        let src = self.pipeline.encode_source(source);
        if src.is_empty() {
            return Err(Error::Untranslatable);
        }
        let ids = decode(&self.model, &src, &self.decode_options())?;
        let text = self.pipeline.decode_target(&ids);
        let updates_seen = self.updates_applied();
        let mut h = Fnv::new();
        h.write(&updates_seen.to_le_bytes());
        h.write(&self.model.fingerprint().to_le_bytes());
        h.write(source.as_bytes());
        Ok(Translation {
            hypothesis_id: format!("h{:016x}", h.finish()),
            text,
            updates_seen,
        })
    }

    fn encode_pair(&self, pair: &TrainingPair) -> Result<(Vec<usize>, Vec<usize>)> {
        let src = self.pipeline.encode_source(&pair.source);
        if src.is_empty() {
            return Err(Error::EmptySequence("source"));
        }
        let tgt = self.pipeline.encode_target(&pair.post_edit);
        if tgt.is_empty() {
            return Err(Error::EmptySequence("post_edit"));
        }
        Ok((src, tgt))
    }

    /// Current model loss on a pair, without updating.
    pub fn pair_loss(&self, source: &str, post_edit: &str) -> Result<f64> {
        let (src, tgt) = self.encode_pair(&TrainingPair::new("", source, post_edit, 0))?;
        Ok(f64::from(self.model.loss(&src, &tgt)?))
    }

    /// Runs `ol_iterations` clipped SGD steps on the pair and logs it. On
    /// any error the parameters are restored and the counter is unchanged.
    pub fn confirm_and_update(&mut self, pair: TrainingPair) -> Result<UpdateReport> {
        let (src, tgt) = self.encode_pair(&pair)?;
        let started = self.clock.monotonic_ns();
        let snapshot = self.model.params().clone();
        match self.apply_steps(&src, &tgt) {
            Ok((pre_loss, post_loss)) => {
                let elapsed = Duration::from_nanos(self.clock.monotonic_ns().saturating_sub(started));
                self.update_log.push(UpdateRecord {
                    pair,
                    pre_loss,
                    post_loss,
                });
                Ok(UpdateReport {
                    pre_loss,
                    post_loss,
                    steps: self.config.ol_iterations,
                    elapsed,
                    updates_applied: self.updates_applied(),
                })
            }
            Err(e) => {
                *self.model.params_mut() = snapshot;
                Err(e)
            }
        }
    }

    fn apply_steps(&mut self, src: &[usize], tgt: &[usize]) -> Result<(f64, f64)> {
        let lr = self.config.learning_rate as f32;
        let mut pre = None;
        for _ in 0..self.config.ol_iterations {
            let (loss, mut grads) = self.model.loss_and_grad(src, tgt)?;
            pre.get_or_insert(f64::from(loss));
            grads.clip_norm(CLIP_NORM as f32);
            sgd_step(&mut self.model, &grads, lr)?;
        }
        if !self.model.params().is_finite() {
            return Err(Error::Numeric("update produced non-finite parameters".into()));
        }
        let post = f64::from(self.model.loss(src, tgt)?);
        Ok((pre.unwrap_or(post), post))
    }

    /// Update log as tab-separated lines: segment id, timestamp, pre-loss,
    /// post-loss.
    pub fn export_update_log(&self) -> String {
        let mut out = String::new();
        for r in &self.update_log {
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{:.6}\n",
                r.pair.segment_id, r.pair.timestamp_ms, r.pre_loss, r.post_loss
            ));
        }
        out
    }

    /// Stamps a pair with the session clock.
    pub fn pair_now(&self, segment_id: &str, source: &str, post_edit: &str) -> TrainingPair {
        TrainingPair::new(segment_id, source, post_edit, self.clock.now_ms())
    }
}
