use std::time::Instant;

use aware_core::bench::Stopwatch;

/// Monotonic host clock for latency samples.
#[derive(Clone, Copy, Debug)]
pub struct InstantStopwatch {
    origin: Instant,
}

impl InstantStopwatch {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for InstantStopwatch {
    fn default() -> Self {
        Self::new()
    }
}

impl Stopwatch for InstantStopwatch {
    fn now_ns(&self) -> u64 {
        u64::try_from(self.origin.elapsed().as_nanos()).unwrap_or(u64::MAX)
    }
}
