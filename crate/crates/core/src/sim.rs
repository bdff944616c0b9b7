//! Discrete-event driver over a virtual millisecond clock.
//!
//! A trace is an ordered list of [`ScenarioEvent`]s. Before an event at `t`
//! is dispatched, every timer due at or before `t` fires: clock ticks (device
//! deliveries and ongoing-condition checks), binding deadlines, automatic
//! releases and status-bar changes. After the last event the clock keeps
//! running long enough for every pending binding to resolve, then any session
//! still open is closed.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bench::{NullStopwatch, Stopwatch};
use crate::device::{AppDescriptor, DeviceId, Permission};
use crate::display::{DisplayConfig, RejectedWrite, ScreenMode, StatusBarState};
use crate::engine::{
    AuthorizedSession, Decision, FaultKind, Monitor, MonitorConfig, MonitorError, SoundEvent,
};
use crate::gesture::{GestureConfig, GestureEvent, GestureKind, GestureMode, PendingOperation};
use crate::hooks::{HookEvent, Mediation, MediationOutcome, MediationStage, RequestSpec};
use crate::ids::{AppId, RequestId, SessionId};
use crate::log::{LogCategory, LogEntry, RetroAction, RetroKind, RetroRecord};
use crate::Millis;

pub const DEFAULT_TICK_MS: Millis = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub tick_ms: Millis,
    pub gesture: GestureConfig,
    pub display: DisplayConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick_ms: DEFAULT_TICK_MS,
            gesture: GestureConfig::default(),
            display: DisplayConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn monitor(&self) -> MonitorConfig {
        MonitorConfig { gesture: self.gesture, display: self.display }
    }
}

/// Monotone virtual time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VirtualClock {
    now: Millis,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    /// Moves the clock forward. Returns false (and stays put) if `t` is in the past.
    pub fn advance_to(&mut self, t: Millis) -> bool {
        if t < self.now {
            return false;
        }
        self.now = t;
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventKind {
    InstallApp(AppDescriptor),
    SetForeground { app_id: AppId },
    SetBackground { app_id: AppId },
    Gesture(GestureKind),
    AppRequest(RequestSpec),
    AppRelease { app_id: AppId, device: DeviceId },
    SetScreenMode { mode: ScreenMode },
    SetGestureMode { app_id: AppId, mode: GestureMode },
    Retro { app_id: AppId, action: RetroKind },
    GrantPermission { app_id: AppId, permission: Permission },
    FaultInject(FaultKind),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub seq: u64,
    pub t_ms: Millis,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl ScenarioEvent {
    pub fn new(seq: u64, t_ms: Millis, kind: EventKind) -> Self {
        Self { seq, t_ms, kind }
    }
}

/// Builds a trace with consecutive sequence numbers.
#[derive(Clone, Debug, Default)]
pub struct TraceBuilder {
    events: Vec<ScenarioEvent>,
}

impl TraceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn at(&mut self, t_ms: Millis, kind: EventKind) -> &mut Self {
        let seq = self.events.len() as u64 + 1;
        self.events.push(ScenarioEvent { seq, t_ms, kind });
        self
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn build(self) -> Vec<ScenarioEvent> {
        self.events
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("malformed trace at line {line}: {reason}")]
    MalformedTrace { line: usize, reason: String },
    #[error("fatal monitor error at line {line}: {error}")]
    Fatal { line: usize, error: MonitorError },
}

/// Checks ordering: `seq` strictly increasing, `t_ms` non-decreasing.
pub fn validate_order(events: &[ScenarioEvent]) -> Result<(), SimError> {
    for (i, w) in events.windows(2).enumerate() {
        let line = i + 2;
        if w[1].seq <= w[0].seq {
            let reason = if w[1].seq == w[0].seq {
                format!("duplicate seq {}", w[1].seq)
            } else {
                format!("seq {} after {}", w[1].seq, w[0].seq)
            };
            return Err(SimError::MalformedTrace { line, reason });
        }
        if w[1].t_ms < w[0].t_ms {
            return Err(SimError::MalformedTrace {
                line,
                reason: format!("t_ms {} before {}", w[1].t_ms, w[0].t_ms),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub t: Millis,
    pub bar: StatusBarState,
    pub active_sessions: Vec<SessionId>,
}

/// A trace event the monitor refused without it being a trace defect.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anomaly {
    pub seq: u64,
    pub t: Millis,
    pub error: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestLatency {
    pub request_id: RequestId,
    pub ns: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub events: u64,
    pub requests: u64,
    pub conventional_denied: u64,
    pub granted: u64,
    pub aware_blocked: u64,
    pub aware_denied: u64,
    pub log_blocked: u64,
    pub log_denied: u64,
    pub log_authorized: u64,
    pub log_terminated: u64,
    pub violation_alerts: u64,
    pub sessions: u64,
    pub end_t: Millis,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimConfig,
    pub summary: Summary,
    /// Every app ever installed, as installed.
    pub apps: Vec<AppDescriptor>,
    pub outcomes: Vec<MediationOutcome>,
    pub decisions: Vec<Decision>,
    pub sessions: Vec<AuthorizedSession>,
    pub bindings: Vec<PendingOperation>,
    pub log: Vec<LogEntry>,
    pub retro: Vec<RetroRecord>,
    pub timeline: Vec<TimelineEntry>,
    pub sounds: Vec<SoundEvent>,
    pub hooks: Vec<HookEvent>,
    pub rejected_writes: Vec<RejectedWrite>,
    pub anomalies: Vec<Anomaly>,
    /// Host-measured mediation time. The only non-deterministic section.
    pub latencies_ns: Vec<RequestLatency>,
}

impl SimulationReport {
    /// Zeroes host-measured fields so reports can be compared byte for byte.
    pub fn mask_latencies(&mut self) {
        for l in &mut self.latencies_ns {
            l.ns = 0;
        }
    }

    pub fn log_count(&self, category: LogCategory) -> usize {
        self.log.iter().filter(|e| e.category == category).count()
    }

    pub fn stage_count(&self, stage: MediationStage) -> usize {
        self.outcomes.iter().filter(|o| o.stage == stage).count()
    }
}

/// Incremental driver. [`Simulator::run`] covers the batch case; the UI
/// bridge feeds events one at a time.
pub struct Simulator<S: Stopwatch = NullStopwatch> {
    config: SimConfig,
    clock: VirtualClock,
    next_tick: Millis,
    monitor: Monitor,
    stopwatch: S,
    apps: Vec<AppDescriptor>,
    timeline: Vec<TimelineEntry>,
    anomalies: Vec<Anomaly>,
    latencies: Vec<RequestLatency>,
    events: u64,
    last_event_t: Millis,
}

impl Simulator<NullStopwatch> {
    pub fn new(config: SimConfig) -> Self {
        Self::with_stopwatch(config, NullStopwatch)
    }

    /// Runs a whole trace and closes the simulation.
    pub fn run(config: SimConfig, events: &[ScenarioEvent]) -> Result<SimulationReport, SimError> {
        Self::run_with(config, events, NullStopwatch)
    }
}

impl<S: Stopwatch> Simulator<S> {
    pub fn with_stopwatch(config: SimConfig, stopwatch: S) -> Self {
        let mut sim = Self {
            config,
            clock: VirtualClock::new(),
            next_tick: 0,
            monitor: Monitor::new(config.monitor()),
            stopwatch,
            apps: Vec::new(),
            timeline: Vec::new(),
            anomalies: Vec::new(),
            latencies: Vec::new(),
            events: 0,
            last_event_t: 0,
        };
        sim.record();
        sim
    }

    pub fn run_with(config: SimConfig, events: &[ScenarioEvent], stopwatch: S) -> Result<SimulationReport, SimError> {
        validate_order(events)?;
        let mut sim = Self::with_stopwatch(config, stopwatch);
        for (i, ev) in events.iter().enumerate() {
            sim.apply(ev).map_err(|e| e.at_line(i + 1))?;
        }
        Ok(sim.finish())
    }

    pub fn config(&self) -> SimConfig {
        self.config
    }

    pub fn now(&self) -> Millis {
        self.clock.now()
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    pub fn timeline(&self) -> &[TimelineEntry] {
        &self.timeline
    }

    /// Fires every timer due at or before `t` and moves the clock there.
    pub fn advance_to(&mut self, t: Millis) {
        let tick = self.config.tick_ms.max(1);
        loop {
            let wake = self.monitor.next_wakeup().filter(|w| *w <= t);
            let next = match wake {
                Some(w) if w < self.next_tick => w,
                _ if self.next_tick <= t => self.next_tick,
                Some(w) => w,
                None => break,
            };
            // Timers never point into the past; clamp in case one is due now.
            let at = next.max(self.clock.now());
            self.clock.advance_to(at);
            if at == self.next_tick {
                self.monitor.tick(at);
                self.next_tick += tick;
            } else {
                let before = self.monitor.next_wakeup();
                self.monitor.advance_timers(at);
                if self.monitor.next_wakeup() == before && before.is_some_and(|b| b <= at) {
                    break;
                }
            }
            self.record();
        }
        self.clock.advance_to(t);
        self.monitor.advance_timers(t);
        self.record();
    }

    /// Dispatches one event at its timestamp. Errors carry line 0; batch
    /// callers fill in the position.
    pub fn apply(&mut self, ev: &ScenarioEvent) -> Result<(), SimError> {
        if ev.t_ms < self.clock.now() {
            return Err(SimError::MalformedTrace {
                line: 0,
                reason: format!("t_ms {} is before current time {}", ev.t_ms, self.clock.now()),
            });
        }
        self.advance_to(ev.t_ms);
        self.events += 1;
        self.last_event_t = ev.t_ms;
        let malformed = |e: MonitorError| SimError::MalformedTrace { line: 0, reason: e.to_string() };
        match &ev.kind {
            EventKind::InstallApp(app) => {
                self.monitor.install_app(app.clone()).map_err(malformed)?;
                self.apps.push(app.clone());
            }
            EventKind::SetForeground { app_id } => self.monitor.set_foreground(app_id).map_err(malformed)?,
            EventKind::SetBackground { app_id } => self.monitor.set_background(app_id).map_err(malformed)?,
            EventKind::Gesture(kind) => {
                self.monitor.on_gesture(GestureEvent { kind: kind.clone(), t: ev.t_ms });
            }
            EventKind::AppRequest(spec) => {
                let start = self.stopwatch.now_ns();
                let result = self.monitor.intercept_request(spec.clone());
                let ns = self.stopwatch.now_ns().saturating_sub(start);
                match result {
                    Ok(m) => {
                        let request_id = match &m {
                            Mediation::Decided(o) => o.request_id,
                            Mediation::Deferred { request_id, .. } => *request_id,
                        };
                        self.latencies.push(RequestLatency { request_id, ns });
                    }
                    Err(e @ MonitorError::ServiceMismatch { .. }) => {
                        return Err(SimError::Fatal { line: 0, error: e });
                    }
                    Err(e) => return Err(malformed(e)),
                }
            }
            EventKind::AppRelease { app_id, device } => {
                if let Err(e) = self.monitor.app_release(app_id, *device) {
                    self.anomaly(ev, &e);
                }
            }
            EventKind::SetScreenMode { mode } => self.monitor.set_screen_mode(*mode),
            EventKind::SetGestureMode { app_id, mode } => {
                self.monitor.set_gesture_mode(app_id, *mode).map_err(malformed)?
            }
            EventKind::Retro { app_id, action } => {
                let action = RetroAction { kind: action.clone(), app_id: app_id.clone(), t: ev.t_ms };
                self.monitor.apply_retro_action(action).map_err(malformed)?;
            }
            EventKind::GrantPermission { app_id, permission } => {
                self.monitor.grant_permission(app_id, *permission).map_err(malformed)?
            }
            EventKind::FaultInject(fault) => self.monitor.inject_fault(fault.clone()),
        }
        self.record();
        Ok(())
    }

    fn anomaly(&mut self, ev: &ScenarioEvent, e: &MonitorError) {
        self.anomalies.push(Anomaly { seq: ev.seq, t: ev.t_ms, error: e.to_string() });
    }

    fn record(&mut self) {
        let bar = self.monitor.display().snapshot();
        let active: Vec<SessionId> = self.monitor.active_sessions().map(|s| s.session_id).collect();
        if let Some(last) = self.timeline.last() {
            if last.bar == bar && last.active_sessions == active {
                return;
            }
            if last.t == self.clock.now() {
                self.timeline.pop();
            }
        }
        self.timeline.push(TimelineEntry { t: self.clock.now(), bar, active_sessions: active });
    }

    /// Time at which a finished trace has certainly settled.
    pub fn drain_horizon(&self) -> Millis {
        let g = self.config.gesture;
        self.last_event_t + g.pending_timeout_ms.max(g.grace_ms) + self.config.tick_ms
    }

    /// Runs the clock to the drain horizon, closes what is still open and
    /// produces the report.
    pub fn finish(mut self) -> SimulationReport {
        let end = self.drain_horizon().max(self.clock.now());
        self.advance_to(end);
        self.monitor.shutdown();
        self.monitor.advance_timers(end);
        self.record();
        self.into_report()
    }

    /// Report of the current state without closing anything.
    pub fn snapshot_report(&self) -> SimulationReport
    where
        S: Clone,
    {
        Self {
            config: self.config,
            clock: self.clock,
            next_tick: self.next_tick,
            monitor: self.monitor.clone(),
            stopwatch: self.stopwatch.clone(),
            apps: self.apps.clone(),
            timeline: self.timeline.clone(),
            anomalies: self.anomalies.clone(),
            latencies: self.latencies.clone(),
            events: self.events,
            last_event_t: self.last_event_t,
        }
        .into_report()
    }

    fn into_report(self) -> SimulationReport {
        let m = &self.monitor;
        let outcomes = m.outcomes().to_vec();
        let stage = |s: MediationStage| outcomes.iter().filter(|o| o.stage == s).count() as u64;
        let log = m.log();
        let summary = Summary {
            events: self.events,
            requests: m.hooks().iter().filter(|h| matches!(h.kind, crate::hooks::HookKind::RequestArrived { .. })).count() as u64,
            conventional_denied: stage(MediationStage::ConventionalDenied),
            granted: stage(MediationStage::Granted),
            aware_blocked: stage(MediationStage::AwareBlocked),
            aware_denied: stage(MediationStage::AwareDenied),
            log_blocked: log.count(LogCategory::Blocked) as u64,
            log_denied: log.count(LogCategory::Denied) as u64,
            log_authorized: log.count(LogCategory::Authorized) as u64,
            log_terminated: log.count(LogCategory::Terminated) as u64,
            violation_alerts: m.sounds().len() as u64,
            sessions: m.sessions().count() as u64,
            end_t: self.clock.now(),
        };
        SimulationReport {
            config: self.config,
            summary,
            apps: self.apps,
            outcomes,
            decisions: m.decisions().to_vec(),
            sessions: m.sessions().cloned().collect(),
            bindings: m.gestures().bindings().cloned().collect(),
            log: log.entries().to_vec(),
            retro: log.retro_records().to_vec(),
            timeline: self.timeline,
            sounds: m.sounds().to_vec(),
            hooks: m.hooks().to_vec(),
            rejected_writes: m.rejected_writes().to_vec(),
            anomalies: self.anomalies,
            latencies_ns: self.latencies,
        }
    }
}

impl SimError {
    fn at_line(self, line: usize) -> Self {
        match self {
            SimError::MalformedTrace { reason, .. } => SimError::MalformedTrace { line, reason },
            SimError::Fatal { error, .. } => SimError::Fatal { line, error },
        }
    }
}
