//! Core of an online-adaptive machine translation engine.
//!
//! Everything here is `no_std` + `alloc`: text preprocessing, a small
//! reverse-mode autodiff with an attention encoder-decoder, translation
//! quality metrics, the per-segment online adaptation procedure, effort
//! aggregation over post-editing logs, and a simulated post-editing harness.
//! File formats, the HTTP server and the command-line tools live in the
//! `adaptmt` crate.
#![no_std]
extern crate alloc;

pub mod adaptation;
pub mod error;
pub mod metrics;
pub mod neuralmt;
pub mod pelog;
pub mod simulator;
pub mod textpipe;

pub use error::{Error, Result};
