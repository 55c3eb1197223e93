//! File formats, persistence, the HTTP translation server and the
//! command-line tools around [`adaptmt_core`].

pub mod checkpoint;
pub mod error;
pub mod files;
pub mod pelog_xml;
pub mod server;

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use adaptmt_core::adaptation::Clock;

pub use error::{Error, Result};

/// Wall clock plus a monotonic timer started at construction.
#[derive(Debug, Clone, Copy)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }

    fn monotonic_ns(&self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }
}
