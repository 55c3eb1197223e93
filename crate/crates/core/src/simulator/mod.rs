//! Simulated post-editing: replay a document with the reference standing
//! in for the translator's post-edit, with online learning on or off, and
//! compare the two runs.

mod corpus;
mod run;

pub use corpus::{generate, CorpusSpec, SyntheticCorpus, TERMS};
pub use run::{
    compare_runs, pretrain, run_simulation, ComparisonReport, ComparisonRow, PretrainSpec, SegmentResult,
    SimulationRun, SimulationSummary,
};
