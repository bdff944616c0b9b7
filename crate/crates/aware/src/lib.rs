//! Host side of the Aware reference monitor: trace and report files, log
//! export, the command line and the front-end bridge.

pub use aware_core as core;

pub mod bridge;
pub mod cli;
pub mod export;
pub mod report;
pub mod stopwatch;
pub mod trace;

pub use stopwatch::InstantStopwatch;
