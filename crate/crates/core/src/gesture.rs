//! Gesture identification.
//!
//! Raw pointer and fingerprint events become *bindings*: the association of
//! one user gesture with one (app, operation, device) triple. A binding is
//! created when the user presses a soft button, is confirmed by releasing the
//! finger inside the button (or by a fingerprint scan in fingerprint mode),
//! and is aborted by sliding the finger out before releasing. A binding left
//! alone past its deadline expires.
//!
//! The tracker keeps no timers of its own; [`GestureTracker::expire_due`] is
//! called by the engine loop as virtual time advances.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::device::{AppDescriptor, ConfirmMode, DeviceId, OperationKind};
use crate::ids::{AppId, BindingId, RequestId, SessionId};
use crate::Millis;

pub const DEFAULT_PENDING_TIMEOUT_MS: Millis = 10_000;
pub const DEFAULT_GRACE_MS: Millis = 3_000;

/// Button id recorded on bindings created by the power + volume-down chord.
pub const CHORD_BUTTON: &str = "power+volume-down";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GestureKind {
    /// `button: None` is a press outside any soft button.
    PointerDown { button: Option<String> },
    PointerMove { inside: bool },
    PointerUp,
    FingerprintScan,
    /// Power + volume-down pressed together.
    PhysicalChord,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestureEvent {
    pub kind: GestureKind,
    pub t: Millis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExemptReason {
    UserWhitelisted,
    RemoteController,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum GestureMode {
    #[default]
    Standard,
    FingerprintConfirm,
    /// Skips the gesture preconditions. Messages and logs still apply.
    Exempt(ExemptReason),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Finger down on the button, pending message shown.
    Held,
    /// User approved; waiting for the app's matching request.
    AwaitingRequest,
    /// Consumed by an authorized session.
    Confirmed,
    Aborted,
    Expired,
}

impl Phase {
    pub fn is_live(self) -> bool {
        matches!(self, Phase::Held | Phase::AwaitingRequest)
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Confirmed | Phase::Aborted | Phase::Expired)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortReason {
    SlideOut,
    ReleasedBeforeRequest,
    AppUninstalled,
    DeviceBusy,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingOperation {
    pub binding_id: BindingId,
    pub app_id: AppId,
    pub button_id: String,
    pub op: OperationKind,
    pub device: DeviceId,
    pub confirm_mode: ConfirmMode,
    pub created_t: Millis,
    pub deadline_t: Millis,
    pub phase: Phase,
    pub confirmed_t: Option<Millis>,
    pub resolved_t: Option<Millis>,
    pub abort_reason: Option<AbortReason>,
    /// Request waiting on this binding for the user's decision.
    pub attached: Option<RequestId>,
    pub session: Option<SessionId>,
    pub system: bool,
}

impl PendingOperation {
    pub fn matches(&self, app: &AppId, op: OperationKind, device: DeviceId) -> bool {
        &self.app_id == app && self.op == op && self.device == device
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GestureEffect {
    None,
    Created(BindingId),
    /// User approval registered; the binding is now `AwaitingRequest`.
    Confirmed(BindingId),
    Aborted(BindingId, AbortReason),
    /// Finger lifted from a hold-to-sustain button whose session is running.
    SustainEnded { binding: BindingId, inside: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pointer {
    Up,
    Down { binding: Option<BindingId>, inside: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestureConfig {
    pub pending_timeout_ms: Millis,
    pub grace_ms: Millis,
}

impl Default for GestureConfig {
    fn default() -> Self {
        Self {
            pending_timeout_ms: DEFAULT_PENDING_TIMEOUT_MS,
            grace_ms: DEFAULT_GRACE_MS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GestureTracker {
    config: GestureConfig,
    modes: BTreeMap<AppId, GestureMode>,
    bindings: BTreeMap<BindingId, PendingOperation>,
    live: BTreeMap<AppId, BindingId>,
    pointer: Pointer,
    next_id: u64,
}

impl GestureTracker {
    pub fn new(config: GestureConfig) -> Self {
        Self {
            config,
            modes: BTreeMap::new(),
            bindings: BTreeMap::new(),
            live: BTreeMap::new(),
            pointer: Pointer::Up,
            next_id: 1,
        }
    }

    pub fn config(&self) -> GestureConfig {
        self.config
    }

    pub fn mode(&self, app: &AppId) -> GestureMode {
        self.modes.get(app).copied().unwrap_or_default()
    }

    pub fn set_mode(&mut self, app: AppId, mode: GestureMode) {
        if mode == GestureMode::Standard {
            self.modes.remove(&app);
        } else {
            self.modes.insert(app, mode);
        }
    }

    pub fn forget_app(&mut self, app: &AppId) {
        self.modes.remove(app);
    }

    pub fn binding(&self, id: BindingId) -> Option<&PendingOperation> {
        self.bindings.get(&id)
    }

    pub fn bindings(&self) -> impl Iterator<Item = &PendingOperation> {
        self.bindings.values()
    }

    pub fn live_binding(&self, app: &AppId) -> Option<&PendingOperation> {
        self.live.get(app).and_then(|id| self.bindings.get(id))
    }

    /// The live binding of `app` whose declared triple is exactly (`op`, `device`).
    pub fn find_live(&self, app: &AppId, op: OperationKind, device: DeviceId) -> Option<BindingId> {
        self.live_binding(app)
            .filter(|b| b.matches(app, op, device))
            .map(|b| b.binding_id)
    }

    /// True while the finger that created `id` is still down on it.
    pub fn is_held_down(&self, id: BindingId) -> bool {
        matches!(self.pointer, Pointer::Down { binding: Some(b), .. } if b == id)
    }

    pub fn on_gesture(&mut self, ev: &GestureEvent, foreground: Option<&AppDescriptor>) -> GestureEffect {
        match &ev.kind {
            GestureKind::PointerDown { button } => self.pointer_down(button.as_deref(), ev.t, foreground),
            GestureKind::PointerMove { inside } => {
                if let Pointer::Down { inside: ref mut cur, .. } = self.pointer {
                    *cur = *inside;
                }
                GestureEffect::None
            }
            GestureKind::PointerUp => self.pointer_up(ev.t),
            GestureKind::FingerprintScan => {
                let Some(app) = foreground else {
                    return GestureEffect::None;
                };
                if self.mode(&app.app_id) != GestureMode::FingerprintConfirm {
                    return GestureEffect::None;
                }
                match self.live_binding(&app.app_id) {
                    Some(b) if b.phase == Phase::Held => {
                        let id = b.binding_id;
                        self.confirm(id, ev.t);
                        GestureEffect::Confirmed(id)
                    }
                    _ => GestureEffect::None,
                }
            }
            // The chord is routed through `create_system_binding` by the engine.
            GestureKind::PhysicalChord => GestureEffect::None,
        }
    }

    fn pointer_down(&mut self, button: Option<&str>, t: Millis, foreground: Option<&AppDescriptor>) -> GestureEffect {
        if matches!(self.pointer, Pointer::Down { .. }) {
            return GestureEffect::None;
        }
        let target = match (button, foreground) {
            (Some(id), Some(app)) => app.button(id).map(|b| (app, b)),
            _ => None,
        };
        let Some((app, button)) = target else {
            self.pointer = Pointer::Down { binding: None, inside: false };
            return GestureEffect::None;
        };
        if self.live.contains_key(&app.app_id) {
            // One pending operation per app; a second press is ignored.
            self.pointer = Pointer::Down { binding: None, inside: true };
            return GestureEffect::None;
        }
        let id = self.insert(PendingOperation {
            binding_id: BindingId(0),
            app_id: app.app_id.clone(),
            button_id: button.button_id.clone(),
            op: button.declared_op,
            device: button.declared_device,
            confirm_mode: button.confirm_mode,
            created_t: t,
            deadline_t: t + self.config.pending_timeout_ms,
            phase: Phase::Held,
            confirmed_t: None,
            resolved_t: None,
            abort_reason: None,
            attached: None,
            session: None,
            system: false,
        });
        self.pointer = Pointer::Down { binding: Some(id), inside: true };
        GestureEffect::Created(id)
    }

    fn pointer_up(&mut self, t: Millis) -> GestureEffect {
        let Pointer::Down { binding: Some(id), inside } = core::mem::replace(&mut self.pointer, Pointer::Up) else {
            return GestureEffect::None;
        };
        let Some(b) = self.bindings.get(&id) else {
            return GestureEffect::None;
        };
        match b.phase {
            Phase::Held => {
                if !inside {
                    self.abort(id, AbortReason::SlideOut, t);
                    return GestureEffect::Aborted(id, AbortReason::SlideOut);
                }
                if self.mode(&b.app_id) == GestureMode::FingerprintConfirm {
                    // Waits for the scan until the deadline.
                    return GestureEffect::None;
                }
                match b.confirm_mode {
                    ConfirmMode::ReleaseToConfirm => {
                        self.confirm(id, t);
                        GestureEffect::Confirmed(id)
                    }
                    ConfirmMode::HoldToSustain => {
                        self.abort(id, AbortReason::ReleasedBeforeRequest, t);
                        GestureEffect::Aborted(id, AbortReason::ReleasedBeforeRequest)
                    }
                }
            }
            Phase::Confirmed if b.confirm_mode == ConfirmMode::HoldToSustain && b.session.is_some() => {
                GestureEffect::SustainEnded { binding: id, inside }
            }
            _ => GestureEffect::None,
        }
    }

    fn insert(&mut self, mut op: PendingOperation) -> BindingId {
        let id = BindingId(self.next_id);
        self.next_id += 1;
        op.binding_id = id;
        self.live.insert(op.app_id.clone(), id);
        self.bindings.insert(id, op);
        id
    }

    /// Binding for the hardware screenshot chord, owned by the system app and
    /// approved on creation.
    pub fn create_system_binding(&mut self, app: AppId, t: Millis) -> BindingId {
        if let Some(prev) = self.live.get(&app).copied() {
            self.expire(prev, t);
        }
        let id = self.insert(PendingOperation {
            binding_id: BindingId(0),
            app_id: app,
            button_id: CHORD_BUTTON.into(),
            op: OperationKind::CaptureScreenshot,
            device: DeviceId::ScreenBuffer,
            confirm_mode: ConfirmMode::ReleaseToConfirm,
            created_t: t,
            deadline_t: t + self.config.pending_timeout_ms,
            phase: Phase::Held,
            confirmed_t: None,
            resolved_t: None,
            abort_reason: None,
            attached: None,
            session: None,
            system: true,
        });
        self.confirm(id, t);
        id
    }

    fn confirm(&mut self, id: BindingId, t: Millis) {
        if let Some(b) = self.bindings.get_mut(&id) {
            b.phase = Phase::AwaitingRequest;
            b.confirmed_t = Some(t);
        }
    }

    pub fn attach(&mut self, id: BindingId, request: RequestId) {
        if let Some(b) = self.bindings.get_mut(&id) {
            b.attached = Some(request);
        }
    }

    /// Marks the binding as consumed by `session`.
    pub fn consume(&mut self, id: BindingId, session: SessionId, t: Millis) {
        if let Some(b) = self.bindings.get_mut(&id) {
            b.phase = Phase::Confirmed;
            b.session = Some(session);
            b.resolved_t = Some(t);
            if self.live.get(&b.app_id) == Some(&id) {
                self.live.remove(&b.app_id);
            }
        }
    }

    pub fn abort(&mut self, id: BindingId, reason: AbortReason, t: Millis) {
        if let Some(b) = self.bindings.get_mut(&id) {
            if !b.phase.is_live() {
                return;
            }
            b.phase = Phase::Aborted;
            b.abort_reason = Some(reason);
            b.resolved_t = Some(t);
            if self.live.get(&b.app_id) == Some(&id) {
                self.live.remove(&b.app_id);
            }
        }
    }

    fn expire(&mut self, id: BindingId, t: Millis) {
        if let Some(b) = self.bindings.get_mut(&id) {
            if !b.phase.is_live() {
                return;
            }
            b.phase = Phase::Expired;
            b.resolved_t = Some(t);
            if self.live.get(&b.app_id) == Some(&id) {
                self.live.remove(&b.app_id);
            }
        }
    }

    /// Ends a live binding as expired regardless of its deadline.
    pub fn abort_as_expired(&mut self, id: BindingId, t: Millis) {
        self.expire(id, t);
    }

    fn due_at(&self, b: &PendingOperation) -> Option<Millis> {
        match b.phase {
            Phase::Held => Some(b.deadline_t),
            Phase::AwaitingRequest => b.confirmed_t.map(|c| c + self.config.grace_ms),
            _ => None,
        }
    }

    /// Earliest future instant at which some live binding expires.
    pub fn next_deadline(&self) -> Option<Millis> {
        self.live
            .values()
            .filter_map(|id| self.bindings.get(id))
            .filter_map(|b| self.due_at(b))
            .min()
    }

    /// Expires every live binding whose deadline is `<= now`. Held bindings
    /// expire at their creation deadline; approved bindings expire when the
    /// grace window after approval runs out.
    pub fn expire_due(&mut self, now: Millis) -> Vec<BindingId> {
        let due: Vec<(BindingId, Millis)> = self
            .live
            .values()
            .filter_map(|id| self.bindings.get(id))
            .filter_map(|b| self.due_at(b).map(|d| (b.binding_id, d)))
            .filter(|(_, d)| *d <= now)
            .collect();
        for (id, at) in &due {
            self.expire(*id, *at);
        }
        due.into_iter().map(|(id, _)| id).collect()
    }

    /// Aborts the live binding of an app that is going away.
    pub fn drop_app(&mut self, app: &AppId, t: Millis) -> Option<BindingId> {
        let id = self.live.get(app).copied()?;
        self.abort(id, AbortReason::AppUninstalled, t);
        self.modes.remove(app);
        Some(id)
    }
}
