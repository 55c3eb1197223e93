#![allow(dead_code)]

use std::sync::OnceLock;

use adaptmt_core::adaptation::{AdaptiveSession, ModelConfig};
use adaptmt_core::neuralmt::NmtModel;
use adaptmt_core::simulator::{generate, pretrain, CorpusSpec, PretrainSpec, SyntheticCorpus};
use adaptmt_core::textpipe::Pipeline;

pub struct System {
    pub corpus: SyntheticCorpus,
    pub pipeline: Pipeline,
    pub model: NmtModel<f32>,
}

/// A briefly pretrained system on the synthetic corpus, shared by tests.
pub fn system() -> &'static System {
    static SYSTEM: OnceLock<System> = OnceLock::new();
    SYSTEM.get_or_init(|| {
        let corpus = generate(&CorpusSpec {
            train_size: 120,
            test_size: 40,
            seed: 5,
            ..Default::default()
        });
        let mut spec = PretrainSpec {
            seed: 5,
            ..Default::default()
        };
        spec.train.epochs = 12;
        let (pipeline, model, _) = pretrain(&corpus.train, &spec).unwrap();
        System { corpus, pipeline, model }
    })
}

pub fn config() -> ModelConfig {
    ModelConfig::new("p1", "en", "fr", "p1.bpe", "p1.ckpt")
}

pub fn session(cfg: ModelConfig) -> AdaptiveSession {
    let s = system();
    AdaptiveSession::new(s.model.clone(), s.pipeline.clone(), cfg).unwrap()
}
