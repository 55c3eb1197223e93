//! Online learning from confirmed post-edits: per-project configuration,
//! the adaptive translation session and its update log.

mod config;
mod session;

pub use config::{ModelConfig, CONFIG_VERSION};
pub use session::{
    AdaptiveSession, Clock, FrozenClock, HypothesisLog, TrainingPair, Translation, UpdateRecord,
    UpdateReport,
};
