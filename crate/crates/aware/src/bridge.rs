//! Line-delimited JSON bridge for an interactive front end.
//!
//! Every message carries `"v":1` and a `"type"`. Clients send `Pointer`,
//! `Fingerprint`, `Chord`, `SelectScenario` and `Retro`; the server answers
//! each one with a `Snapshot` (or an `Error` followed by a `Snapshot`) and
//! also pushes a `Snapshot` whenever the visible state changes. Revisions
//! increase by one per snapshot sent and never reset, not even across
//! scenario switches.
//!
//! In a live scenario the user supplies the gestures. Apps that draw soft
//! buttons are driven by the session: pressing a button makes the app ask
//! for the operation the button is wired to, and one-shot captures are
//! released shortly after they start. Apps without buttons keep their
//! scripted behaviour from the builtin scenario.

use std::collections::{BTreeSet, VecDeque};
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use aware_core::device::{ConfirmMode, DeviceId, OperationKind};
use aware_core::display::StatusBarState;
use aware_core::engine::SoundEvent;
use aware_core::gesture::GestureKind;
use aware_core::hooks::RequestSpec;
use aware_core::log::{LogCategory, LogEntry, RetroKind};
use aware_core::scenarios::UnknownScenario;
use aware_core::sim::{EventKind, SimConfig, Simulator};
use aware_core::{builtin_scenario, AppId, BindingId, Millis, ScenarioEvent, SessionId};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;
pub const RECENT_LOG: usize = 20;
pub const RECENT_SOUNDS: usize = 10;
/// How long a live app keeps a photo or screenshot session open.
pub const ONE_SHOT_MS: Millis = 500;
/// How long a live app records after a release-to-confirm press.
pub const RECORDING_MS: Millis = 5_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointerKind {
    Down,
    Move,
    Up,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum ClientMessage {
    /// `button_id` names the soft button under the finger; `coords` are
    /// accepted for front ends that track them but carry no meaning here.
    /// For `move`, `inside` says whether the finger is still on the pressed
    /// button; it defaults to whether a `button_id` was given.
    Pointer {
        kind: PointerKind,
        #[serde(default)]
        button_id: Option<String>,
        #[serde(default)]
        coords: Option<[f64; 2]>,
        #[serde(default)]
        inside: Option<bool>,
    },
    Fingerprint {},
    Chord {},
    SelectScenario { name: String },
    Retro { app_id: AppId, action: RetroKind },
}

impl ClientMessage {
    pub fn to_line(&self) -> String {
        let mut v = serde_json::to_value(self).expect("client messages serialize");
        v["v"] = PROTOCOL_VERSION.into();
        v.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ButtonView {
    pub button_id: String,
    /// App-controlled text. Front ends draw it in the activity area only.
    pub label_text: String,
    pub confirm_mode: ConfirmMode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForegroundView {
    pub app_id: AppId,
    pub display_name: String,
    pub buttons: Vec<ButtonView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: SessionId,
    pub app_id: AppId,
    pub op: OperationKind,
    pub device: DeviceId,
    pub started_t: Millis,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogCounts {
    pub blocked: u64,
    pub denied: u64,
    pub authorized: u64,
    pub terminated: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub revision: u64,
    /// Virtual time since the scenario was selected.
    pub t_ms: Millis,
    pub scenario: String,
    /// Number of client messages handled so far.
    pub ack: u64,
    pub status_bar: StatusBarState,
    pub foreground: Option<ForegroundView>,
    pub active_sessions: Vec<SessionView>,
    pub log_counts: LogCounts,
    pub recent_log: Vec<LogEntry>,
    pub sounds: Vec<SoundEvent>,
}

impl Snapshot {
    fn same_state(&self, other: &Snapshot) -> bool {
        let strip = |s: &Snapshot| Snapshot { revision: 0, t_ms: 0, ..s.clone() };
        strip(self) == strip(other)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ServerBody {
    Snapshot(Snapshot),
    Error { message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerMessage {
    pub v: u32,
    #[serde(flatten)]
    pub body: ServerBody,
}

impl ServerMessage {
    fn new(body: ServerBody) -> Self {
        Self { v: PROTOCOL_VERSION, body }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }

    pub fn snapshot(&self) -> Option<&Snapshot> {
        match &self.body {
            ServerBody::Snapshot(s) => Some(s),
            ServerBody::Error { .. } => None,
        }
    }
}

pub fn parse_client_line(line: &str) -> Result<ClientMessage, String> {
    let mut v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let obj = v.as_object_mut().ok_or("message must be a JSON object")?;
    match obj.remove("v") {
        Some(Value::Number(n)) if n.as_u64() == Some(PROTOCOL_VERSION as u64) => {}
        Some(other) => return Err(format!("unsupported protocol version {other}")),
        None => return Err("missing protocol field \"v\"".into()),
    }
    serde_json::from_value(v).map_err(|e| e.to_string())
}

/// Live apps are the ones with soft buttons; the user drives them.
fn live_apps(events: &[ScenarioEvent]) -> BTreeSet<AppId> {
    events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::InstallApp(a) if !a.soft_buttons.is_empty() => Some(a.app_id.clone()),
            _ => None,
        })
        .collect()
}

fn scripted(events: Vec<ScenarioEvent>, live: &BTreeSet<AppId>) -> VecDeque<ScenarioEvent> {
    events
        .into_iter()
        .filter(|e| match &e.kind {
            EventKind::Gesture(_) => false,
            EventKind::AppRequest(spec) => !live.contains(&spec.app_id),
            EventKind::AppRelease { app_id, .. } => !live.contains(app_id),
            _ => true,
        })
        .collect()
}

/// Bridge state without any I/O or host clock. `now` is the caller's
/// virtual time in milliseconds and must not go backwards.
pub struct LiveSession {
    config: SimConfig,
    sim: Simulator,
    scenario: String,
    script: VecDeque<ScenarioEvent>,
    live: BTreeSet<AppId>,
    /// Caller time at which the current scenario started.
    epoch: Millis,
    seq: u64,
    revision: u64,
    acked: u64,
    prompted: BTreeSet<BindingId>,
    scheduled: BTreeSet<SessionId>,
    releases: Vec<(Millis, AppId, DeviceId, SessionId)>,
    last_sent: Option<Snapshot>,
}

impl LiveSession {
    pub fn new(config: SimConfig, scenario: &str, now: Millis) -> Result<Self, UnknownScenario> {
        let mut s = Self {
            config,
            sim: Simulator::new(config),
            scenario: String::new(),
            script: VecDeque::new(),
            live: BTreeSet::new(),
            epoch: now,
            seq: 0,
            revision: 0,
            acked: 0,
            prompted: BTreeSet::new(),
            scheduled: BTreeSet::new(),
            releases: Vec::new(),
            last_sent: None,
        };
        s.select(scenario, now)?;
        Ok(s)
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    fn select(&mut self, name: &str, now: Millis) -> Result<(), UnknownScenario> {
        let sc = builtin_scenario(name)?;
        let live = live_apps(&sc.events);
        self.sim = Simulator::new(self.config);
        self.script = scripted(sc.events, &live);
        self.live = live;
        self.scenario = sc.name;
        self.epoch = now;
        self.seq = 0;
        self.prompted.clear();
        self.scheduled.clear();
        self.releases.clear();
        self.run_script(0);
        Ok(())
    }

    fn local(&self, now: Millis) -> Millis {
        now.saturating_sub(self.epoch).max(self.sim.now())
    }

    fn apply(&mut self, t: Millis, kind: EventKind) -> Result<(), String> {
        self.seq += 1;
        self.sim.apply(&ScenarioEvent::new(self.seq, t, kind)).map_err(|e| e.to_string())?;
        self.drive_live_apps(t);
        Ok(())
    }

    fn run_script(&mut self, t: Millis) {
        while self.script.front().is_some_and(|e| e.t_ms <= t) {
            let ev = self.script.pop_front().expect("front checked");
            // Builtin scripts are valid on their own; with the live apps'
            // events removed a release may find nothing held, which the
            // simulator records as an anomaly rather than failing.
            let _ = self.apply(ev.t_ms.max(self.sim.now()), ev.kind);
        }
    }

    /// Lets live apps react to what the user just did.
    fn drive_live_apps(&mut self, t: Millis) {
        let fresh: Vec<(BindingId, RequestSpec)> = self
            .sim
            .monitor()
            .gestures()
            .bindings()
            .filter(|b| !b.system && b.phase.is_live() && self.live.contains(&b.app_id) && !self.prompted.contains(&b.binding_id))
            .map(|b| (b.binding_id, RequestSpec::direct(b.app_id.clone(), b.op, b.device)))
            .collect();
        for (id, spec) in fresh {
            self.prompted.insert(id);
            self.seq += 1;
            let _ = self.sim.apply(&ScenarioEvent::new(self.seq, t, EventKind::AppRequest(spec)));
        }
        let m = self.sim.monitor();
        let started: Vec<(SessionId, Option<(Millis, AppId, DeviceId, SessionId)>)> = m
            .active_sessions()
            .filter(|s| self.live.contains(&s.app_id) && !self.scheduled.contains(&s.session_id))
            .map(|s| {
                let held = m
                    .gestures()
                    .bindings()
                    .any(|b| b.session == Some(s.session_id) && b.confirm_mode == ConfirmMode::HoldToSustain);
                // Hold-to-sustain sessions end when the finger lifts.
                let release = (!held).then(|| {
                    let keep = match s.op {
                        OperationKind::TakePhoto | OperationKind::CaptureScreenshot => ONE_SHOT_MS,
                        _ => RECORDING_MS,
                    };
                    (s.started_t + keep, s.app_id.clone(), s.device, s.session_id)
                });
                (s.session_id, release)
            })
            .collect();
        for (sid, release) in started {
            self.scheduled.insert(sid);
            self.releases.extend(release);
        }
    }

    fn run_releases(&mut self, t: Millis) {
        self.releases.sort_by_key(|r| r.0);
        while self.releases.first().is_some_and(|r| r.0 <= t) {
            let (at, app, device, sid) = self.releases.remove(0);
            if self.sim.monitor().session(sid).is_some_and(|s| s.is_active()) {
                let _ = self.apply(at.max(self.sim.now()), EventKind::AppRelease { app_id: app, device });
            }
        }
    }

    /// Moves virtual time to `now`. Returns a snapshot if anything visible changed.
    pub fn step(&mut self, now: Millis) -> Option<ServerMessage> {
        let t = self.local(now);
        loop {
            let next_script = self.script.front().map(|e| e.t_ms).filter(|&s| s <= t);
            let next_release = self.releases.iter().map(|r| r.0).min().filter(|&r| r <= t);
            let Some(at) = next_script.into_iter().chain(next_release).min() else { break };
            self.sim.advance_to(at.max(self.sim.now()));
            self.run_script(at);
            self.run_releases(at);
        }
        self.sim.advance_to(t);
        self.drive_live_apps(t);
        let snap = self.build_snapshot();
        if self.last_sent.as_ref().is_some_and(|last| last.same_state(&snap)) {
            return None;
        }
        Some(self.emit(snap))
    }

    /// Handles one client message at `now`; the returned messages always end
    /// with a snapshot acknowledging it.
    pub fn handle(&mut self, msg: ClientMessage, now: Millis) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        if let Some(s) = self.step(now) {
            out.push(s);
        }
        let t = self.local(now);
        let result = match msg {
            ClientMessage::Pointer { kind, button_id, inside, .. } => {
                let g = match kind {
                    PointerKind::Down => GestureKind::PointerDown { button: button_id },
                    PointerKind::Move => GestureKind::PointerMove { inside: inside.unwrap_or(button_id.is_some()) },
                    PointerKind::Up => GestureKind::PointerUp,
                };
                self.apply(t, EventKind::Gesture(g))
            }
            ClientMessage::Fingerprint {} => self.apply(t, EventKind::Gesture(GestureKind::FingerprintScan)),
            ClientMessage::Chord {} => self.apply(t, EventKind::Gesture(GestureKind::PhysicalChord)),
            ClientMessage::SelectScenario { name } => self.select(&name, now).map_err(|e| e.to_string()),
            ClientMessage::Retro { app_id, action } => self.apply(t, EventKind::Retro { app_id, action }),
        };
        self.acked += 1;
        if let Err(message) = result {
            out.push(ServerMessage::new(ServerBody::Error { message }));
        }
        let snap = self.build_snapshot();
        out.push(self.emit(snap));
        out
    }

    /// Parses and handles one raw line. Malformed lines still get an
    /// `Error` and an acknowledging snapshot.
    pub fn handle_line(&mut self, line: &str, now: Millis) -> Vec<ServerMessage> {
        match parse_client_line(line) {
            Ok(msg) => self.handle(msg, now),
            Err(message) => {
                self.acked += 1;
                let snap = self.build_snapshot();
                vec![ServerMessage::new(ServerBody::Error { message }), self.emit(snap)]
            }
        }
    }

    /// Current state as a fresh snapshot, e.g. for a newly connected client.
    pub fn current(&mut self) -> ServerMessage {
        let snap = self.build_snapshot();
        self.emit(snap)
    }

    fn emit(&mut self, mut snap: Snapshot) -> ServerMessage {
        self.revision += 1;
        snap.revision = self.revision;
        self.last_sent = Some(snap.clone());
        ServerMessage::new(ServerBody::Snapshot(snap))
    }

    fn build_snapshot(&self) -> Snapshot {
        let m = self.sim.monitor();
        let log = m.log();
        let entries = log.entries();
        let count = |c: LogCategory| log.count(c) as u64;
        let sounds = m.sounds();
        Snapshot {
            revision: 0,
            t_ms: self.sim.now(),
            scenario: self.scenario.clone(),
            ack: self.acked,
            status_bar: m.display().snapshot(),
            foreground: m.registry().foreground().map(|a| ForegroundView {
                app_id: a.app_id.clone(),
                display_name: a.display_name.clone(),
                buttons: a
                    .soft_buttons
                    .iter()
                    .map(|b| ButtonView {
                        button_id: b.button_id.clone(),
                        label_text: b.label_text.clone(),
                        confirm_mode: b.confirm_mode,
                    })
                    .collect(),
            }),
            active_sessions: m
                .active_sessions()
                .map(|s| SessionView {
                    session_id: s.session_id,
                    app_id: s.app_id.clone(),
                    op: s.op,
                    device: s.device,
                    started_t: s.started_t,
                })
                .collect(),
            log_counts: LogCounts {
                blocked: count(LogCategory::Blocked),
                denied: count(LogCategory::Denied),
                authorized: count(LogCategory::Authorized),
                terminated: count(LogCategory::Terminated),
            },
            recent_log: entries[entries.len().saturating_sub(RECENT_LOG)..].to_vec(),
            sounds: sounds[sounds.len().saturating_sub(RECENT_SOUNDS)..].to_vec(),
        }
    }
}

enum Input {
    Connected(u64, TcpStream),
    Line(u64, String),
    Closed(u64),
}

/// A running bridge. Dropping it leaves the threads running; call
/// [`Bridge::shutdown`] to stop them.
pub struct Bridge {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    engine: Option<JoinHandle<()>>,
}

impl Bridge {
    /// Starts serving on an already bound listener.
    pub fn spawn(listener: TcpListener, config: SimConfig, scenario: &str) -> io::Result<Bridge> {
        let session = LiveSession::new(config, scenario, 0)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let stop = Arc::new(AtomicBool::new(false));
        let (tx, rx) = mpsc::channel();
        {
            let stop = stop.clone();
            thread::spawn(move || accept_loop(listener, tx, stop));
        }
        let engine = {
            let stop = stop.clone();
            thread::spawn(move || engine_loop(session, rx, stop))
        };
        Ok(Bridge { addr, stop, engine: Some(engine) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the engine stops, which only happens after `shutdown`
    /// from another handle or a panic.
    pub fn wait(mut self) {
        if let Some(h) = self.engine.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.engine.take() {
            let _ = h.join();
        }
    }
}

fn accept_loop(listener: TcpListener, tx: Sender<Input>, stop: Arc<AtomicBool>) {
    let mut next_id = 0;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                next_id += 1;
                let id = next_id;
                let _ = stream.set_nonblocking(false);
                let _ = stream.set_nodelay(true);
                let Ok(reader) = stream.try_clone() else { continue };
                if tx.send(Input::Connected(id, stream)).is_err() {
                    return;
                }
                let tx = tx.clone();
                thread::spawn(move || {
                    for line in BufReader::new(reader).lines() {
                        let Ok(line) = line else { break };
                        if tx.send(Input::Line(id, line)).is_err() {
                            return;
                        }
                    }
                    let _ = tx.send(Input::Closed(id));
                });
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(_) => thread::sleep(Duration::from_millis(5)),
        }
    }
}

fn send(client: &mut Option<(u64, TcpStream)>, msgs: &[ServerMessage]) {
    let Some((_, stream)) = client else { return };
    let mut buf = String::new();
    for m in msgs {
        buf.push_str(&m.to_line());
        buf.push('\n');
    }
    if stream.write_all(buf.as_bytes()).is_err() {
        // The engine keeps running; open bindings expire on their own.
        *client = None;
    }
}

fn engine_loop(mut session: LiveSession, rx: Receiver<Input>, stop: Arc<AtomicBool>) {
    let start = Instant::now();
    let now = || start.elapsed().as_millis() as Millis;
    let mut client: Option<(u64, TcpStream)> = None;
    while !stop.load(Ordering::SeqCst) {
        match rx.recv_timeout(Duration::from_millis(1)) {
            Ok(Input::Connected(id, stream)) => {
                // One front end at a time; a new connection replaces the old one.
                if let Some((_, old)) = client.replace((id, stream)) {
                    let _ = old.shutdown(std::net::Shutdown::Both);
                }
                if let Some(s) = session.step(now()) {
                    send(&mut client, &[s]);
                }
                let hello = session.current();
                send(&mut client, &[hello]);
            }
            Ok(Input::Line(id, line)) => {
                if client.as_ref().is_some_and(|(c, _)| *c == id) && !line.trim().is_empty() {
                    let out = session.handle_line(&line, now());
                    send(&mut client, &out);
                }
            }
            Ok(Input::Closed(id)) => {
                if client.as_ref().is_some_and(|(c, _)| *c == id) {
                    client = None;
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
        if let Some(s) = session.step(now()) {
            send(&mut client, &[s]);
        }
    }
    if let Some((_, s)) = client {
        let _ = s.shutdown(std::net::Shutdown::Both);
    }
}
