//! Core of the Aware reference monitor.
//!
//! Access to cameras, microphone and screen buffer is granted only when a
//! request matches an explicit user gesture on a soft button whose operation
//! is shown on a trusted status bar. Granted sessions stay visible for their
//! whole lifetime and every decision lands in an append-only log.
//!
//! The crate is `no_std` with `alloc`; file formats, timing and the CLI live
//! in the `aware` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

/// Virtual time in milliseconds.
pub type Millis = u64;

pub mod bench;
pub mod device;
pub mod display;
pub mod engine;
pub mod gesture;
pub mod hooks;
pub mod ids;
pub mod log;
pub mod rules;
pub mod scenarios;
pub mod sim;
pub mod tracegen;
pub mod verify;

pub use device::{AppDescriptor, DeviceId, OperationKind, Permission, PermissionSet, SoftButton};
pub use engine::{Monitor, MonitorConfig, MonitorError};
pub use ids::{AppId, BindingId, RequestId, SessionId};
pub use scenarios::{builtin_scenario, Scenario};
pub use sim::{ScenarioEvent, SimConfig, SimError, SimulationReport, Simulator};
