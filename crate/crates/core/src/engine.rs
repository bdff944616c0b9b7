//! The conditional engine.
//!
//! [`Monitor`] owns the whole simulated platform state and is driven by a
//! single event loop: requests, gestures, app releases, retrospective actions
//! and the passage of virtual time. It evaluates the preconditions before
//! granting a session, re-checks the ongoing conditions on every tick, and
//! enforces the exit conditions when a session ends.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::device::{
    AppDescriptor, AppRegistry, ConfirmMode, DeviceError, DeviceId, DeviceTable, Lifecycle,
    OperationKind, Permission, PermissionSet, RegistryError, SystemServiceId,
};
use crate::display::{
    DisplayConfig, MessageKind, MessageSubject, RejectedWrite, ScreenMode, SecurityDisplay,
    SecurityMessage,
};
use crate::gesture::{
    AbortReason, GestureConfig, GestureEffect, GestureEvent, GestureKind, GestureMode,
    GestureTracker, PendingOperation, Phase,
};
use crate::hooks::{
    AccessRequest, HookEvent, HookKind, HookStream, Mediation, MediationOutcome, MediationStage,
    OutcomeDetail, RequestSpec,
};
use crate::ids::{AppId, BindingId, RequestId, SessionId};
use crate::log::{
    AccessLog, DenyReason, LogCategory, LogDetail, RetroAction, RetroKind, RetroRecord,
    TerminationReason,
};
use crate::rules::{PreconditionEval, RuleSet};
use crate::Millis;

/// Owner of bindings created by the hardware screenshot chord.
pub const SYSTEM_APP: &str = "android";

pub const SYSTEM_DISPLAY_NAME: &str = "System";

/// How long the system screenshot session holds the screen buffer.
pub const SCREENSHOT_CAPTURE_MS: Millis = 100;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MonitorError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("{op} cannot target {device}")]
    InvalidDevice { op: OperationKind, device: DeviceId },
    #[error("request {request} for {op} arrived through {got:?}, expected {expected:?}")]
    ServiceMismatch {
        request: RequestId,
        op: OperationKind,
        expected: SystemServiceId,
        got: SystemServiceId,
    },
    #[error("{app} holds no session on {device}")]
    NotHolder { app: AppId, device: DeviceId },
    #[error("session {0} already terminated")]
    AlreadyTerminated(SessionId),
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("app id {0} is reserved")]
    ReservedApp(AppId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionState {
    Active,
    Terminated { reason: TerminationReason, ended_t: Millis },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorizedSession {
    pub session_id: SessionId,
    pub request_id: RequestId,
    pub app_id: AppId,
    /// App whose gesture justified the session (differs from `app_id` for intents).
    pub charged_app: AppId,
    pub op: OperationKind,
    pub device: DeviceId,
    pub devices: Vec<DeviceId>,
    pub binding: Option<BindingId>,
    pub started_t: Millis,
    pub state: SessionState,
}

impl AuthorizedSession {
    pub fn is_active(&self) -> bool {
        self.state == SessionState::Active
    }

    pub fn ended_t(&self) -> Option<Millis> {
        match self.state {
            SessionState::Active => None,
            SessionState::Terminated { ended_t, .. } => Some(ended_t),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Allow(SessionId),
    Block(RuleSet),
}

/// One engine decision with every precondition's value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub request_id: RequestId,
    pub t: Millis,
    pub app_id: AppId,
    pub charged_app: AppId,
    pub op: OperationKind,
    pub device: DeviceId,
    pub binding: Option<BindingId>,
    /// The charged app's gesture mode skipped the gesture preconditions.
    pub exempt: bool,
    pub rules: PreconditionEval,
    pub verdict: Verdict,
    pub stage: MediationStage,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoundEvent {
    pub t: Millis,
    pub app_id: AppId,
    pub op: OperationKind,
    pub device: DeviceId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultKind {
    /// The status-bar channel stops rendering ongoing messages.
    SuppressDisplay,
    /// An app tries to draw on the status bar.
    ForgeStatusBarWrite { app_id: AppId, text: String },
    /// The next Authorized log write is lost.
    SkipLog,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub gesture: GestureConfig,
    pub display: DisplayConfig,
}

#[derive(Clone, Debug)]
pub struct Monitor {
    config: MonitorConfig,
    now: Millis,
    registry: AppRegistry,
    devices: DeviceTable,
    hooks: HookStream,
    gestures: GestureTracker,
    display: SecurityDisplay,
    log: AccessLog,
    sessions: BTreeMap<SessionId, AuthorizedSession>,
    attached: BTreeMap<RequestId, AccessRequest>,
    auto_release: BTreeMap<SessionId, Millis>,
    outcomes: Vec<MediationOutcome>,
    decisions: Vec<Decision>,
    sounds: Vec<SoundEvent>,
    next_request: u64,
    next_session: u64,
}

impl Monitor {
    pub fn new(config: MonitorConfig) -> Self {
        let mut registry = AppRegistry::new();
        registry
            .install(AppDescriptor {
                app_id: AppId::new(SYSTEM_APP),
                display_name: SYSTEM_DISPLAY_NAME.into(),
                granted_permissions: PermissionSet::of(&[Permission::WriteExternalStorage]),
                soft_buttons: Vec::new(),
                lifecycle: Lifecycle::Background,
            })
            .expect("fresh registry");
        Self {
            config,
            now: 0,
            registry,
            devices: DeviceTable::new(),
            hooks: HookStream::new(),
            gestures: GestureTracker::new(config.gesture),
            display: SecurityDisplay::new(config.display),
            log: AccessLog::new(),
            sessions: BTreeMap::new(),
            attached: BTreeMap::new(),
            auto_release: BTreeMap::new(),
            outcomes: Vec::new(),
            decisions: Vec::new(),
            sounds: Vec::new(),
            next_request: 1,
            next_session: 1,
        }
    }

    pub fn config(&self) -> MonitorConfig {
        self.config
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn registry(&self) -> &AppRegistry {
        &self.registry
    }

    pub fn devices(&self) -> &DeviceTable {
        &self.devices
    }

    pub fn hooks(&self) -> &[HookEvent] {
        self.hooks.as_slice()
    }

    pub(crate) fn hooks_mut(&mut self) -> &mut HookStream {
        &mut self.hooks
    }

    pub fn gestures(&self) -> &GestureTracker {
        &self.gestures
    }

    pub fn display(&self) -> &SecurityDisplay {
        &self.display
    }

    pub fn log(&self) -> &AccessLog {
        &self.log
    }

    pub fn sessions(&self) -> impl Iterator<Item = &AuthorizedSession> {
        self.sessions.values()
    }

    pub fn session(&self, id: SessionId) -> Option<&AuthorizedSession> {
        self.sessions.get(&id)
    }

    pub fn active_sessions(&self) -> impl Iterator<Item = &AuthorizedSession> {
        self.sessions.values().filter(|s| s.is_active())
    }

    pub fn outcomes(&self) -> &[MediationOutcome] {
        &self.outcomes
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn sounds(&self) -> &[SoundEvent] {
        &self.sounds
    }

    pub fn rejected_writes(&self) -> &[RejectedWrite] {
        self.display.rejected_writes()
    }

    pub(crate) fn next_request_id(&mut self) -> RequestId {
        let id = RequestId(self.next_request);
        self.next_request += 1;
        id
    }

    pub(crate) fn record_outcome(
        &mut self,
        request_id: RequestId,
        stage: MediationStage,
        detail: OutcomeDetail,
    ) -> MediationOutcome {
        let o = MediationOutcome { request_id, t: self.now, stage, detail };
        self.outcomes.push(o.clone());
        o
    }

    // ---- platform state -------------------------------------------------

    pub fn install_app(&mut self, app: AppDescriptor) -> Result<(), MonitorError> {
        if app.app_id.as_str() == SYSTEM_APP {
            return Err(MonitorError::ReservedApp(app.app_id));
        }
        self.registry.install(app)?;
        Ok(())
    }

    pub fn set_foreground(&mut self, app: &AppId) -> Result<(), MonitorError> {
        self.registry.set_foreground(app)?;
        Ok(())
    }

    pub fn set_background(&mut self, app: &AppId) -> Result<(), MonitorError> {
        self.registry.set_background(app)?;
        Ok(())
    }

    pub fn set_screen_mode(&mut self, mode: ScreenMode) {
        self.display.set_screen_mode(mode, self.now);
    }

    pub fn set_gesture_mode(&mut self, app: &AppId, mode: GestureMode) -> Result<(), MonitorError> {
        self.registry.get(app)?;
        self.gestures.set_mode(app.clone(), mode);
        Ok(())
    }

    pub fn grant_permission(&mut self, app: &AppId, p: Permission) -> Result<(), MonitorError> {
        self.registry.get_mut(app)?.granted_permissions.insert(p);
        Ok(())
    }

    pub fn inject_fault(&mut self, fault: FaultKind) {
        match fault {
            FaultKind::SuppressDisplay => self.display.set_suppressed(true, self.now),
            FaultKind::ForgeStatusBarWrite { app_id, text } => {
                // Rejection is the expected outcome; it is recorded by the display.
                let _ = self.display.untrusted_write(app_id, text, self.now);
            }
            FaultKind::SkipLog => self.log.skip_next_authorized(),
        }
    }

    // ---- preconditions --------------------------------------------------

    /// Evaluates the preconditions for a request that passed the conventional
    /// checks and either grants it, blocks it, or parks it on a held binding
    /// until the user decides.
    pub fn decide(&mut self, req: AccessRequest) -> Result<Mediation, MonitorError> {
        let expected = req.op.service();
        if req.service != expected {
            return Err(MonitorError::ServiceMismatch {
                request: req.request_id,
                op: req.op,
                expected,
                got: req.service,
            });
        }
        let charged = req.charged_app().clone();
        let mode = self.gestures.mode(&charged);
        if let GestureMode::Exempt(_) = mode {
            let eval = PreconditionEval { p1: true, p2: true, p3: true, p4: true };
            return Ok(Mediation::Decided(self.allow(req, eval, None)));
        }

        let Some(binding_id) = self.gestures.find_live(&charged, req.op, req.device) else {
            let eval = PreconditionEval { p1: false, p2: true, p3: true, p4: false };
            return Ok(Mediation::Decided(self.block(req, eval, None)));
        };
        let binding = self.gestures.binding(binding_id).cloned().expect("live binding");
        let p3 = self.display.is_pending_displayed(binding_id);

        let p4 = match binding.phase {
            Phase::AwaitingRequest => true,
            Phase::Held
                if binding.confirm_mode == ConfirmMode::HoldToSustain
                    && mode == GestureMode::Standard
                    && binding.attached.is_none()
                    && self.gestures.is_held_down(binding_id) =>
            {
                true
            }
            Phase::Held if binding.attached.is_some() => {
                // Another request already waits on this binding and wins.
                let eval = PreconditionEval { p1: true, p2: true, p3, p4: false };
                return Ok(Mediation::Decided(self.block(req, eval, Some(binding_id))));
            }
            Phase::Held => {
                let request_id = req.request_id;
                self.gestures.attach(binding_id, request_id);
                self.attached.insert(request_id, req);
                return Ok(Mediation::Deferred { request_id, binding: binding_id });
            }
            _ => false,
        };
        let eval = PreconditionEval { p1: true, p2: true, p3, p4 };
        if eval.all_satisfied() {
            Ok(Mediation::Decided(self.allow(req, eval, Some(binding_id))))
        } else {
            Ok(Mediation::Decided(self.block(req, eval, Some(binding_id))))
        }
    }

    fn allow(&mut self, req: AccessRequest, eval: PreconditionEval, binding: Option<BindingId>) -> MediationOutcome {
        let devices = req.op.device_set(req.device).unwrap_or_default();
        if let Some((device, holder)) = self.devices.first_busy(&devices) {
            // Only reachable for a parked request whose device was taken meanwhile.
            if let Some(b) = binding {
                self.gestures.abort(b, AbortReason::DeviceBusy, self.now);
                self.display.remove_pending(b, self.now);
            }
            return self.record_outcome(
                req.request_id,
                MediationStage::ConventionalDenied,
                OutcomeDetail::DeviceBusy { device, holder },
            );
        }
        let sid = SessionId(self.next_session);
        self.next_session += 1;
        for d in &devices {
            self.devices.acquire(*d, sid, self.now, &mut self.hooks);
        }
        if let Some(b) = binding {
            self.gestures.consume(b, sid, self.now);
            self.display.remove_pending(b, self.now);
        }
        let name = self.registry.display_name(&req.app_id);
        self.display.add_ongoing(
            SecurityMessage::new(
                MessageKind::Ongoing,
                req.app_id.clone(),
                name,
                req.op,
                req.device,
                MessageSubject::Session(sid),
            ),
            self.now,
        );
        self.log.append(
            LogCategory::Authorized,
            req.app_id.clone(),
            req.op,
            req.device,
            self.now,
            LogDetail::Session(sid),
        );
        self.sessions.insert(
            sid,
            AuthorizedSession {
                session_id: sid,
                request_id: req.request_id,
                app_id: req.app_id.clone(),
                charged_app: req.charged_app().clone(),
                op: req.op,
                device: req.device,
                devices,
                binding,
                started_t: self.now,
                state: SessionState::Active,
            },
        );
        self.push_decision(&req, binding, eval, Verdict::Allow(sid), MediationStage::Granted);
        self.record_outcome(req.request_id, MediationStage::Granted, OutcomeDetail::Session(sid))
    }

    fn block(&mut self, req: AccessRequest, eval: PreconditionEval, binding: Option<BindingId>) -> MediationOutcome {
        let unsatisfied = eval.unsatisfied();
        self.alert(&req.app_id, req.op, req.device);
        self.log.append(
            LogCategory::Blocked,
            req.app_id.clone(),
            req.op,
            req.device,
            self.now,
            LogDetail::Unsatisfied(unsatisfied),
        );
        self.push_decision(&req, binding, eval, Verdict::Block(unsatisfied), MediationStage::AwareBlocked);
        self.record_outcome(req.request_id, MediationStage::AwareBlocked, OutcomeDetail::Unsatisfied(unsatisfied))
    }

    /// The user did not approve a parked request.
    fn deny(&mut self, req: AccessRequest, binding: BindingId) -> MediationOutcome {
        let eval = PreconditionEval { p1: true, p2: true, p3: true, p4: false };
        let unsatisfied = eval.unsatisfied();
        self.push_decision(&req, Some(binding), eval, Verdict::Block(unsatisfied), MediationStage::AwareDenied);
        self.record_outcome(req.request_id, MediationStage::AwareDenied, OutcomeDetail::Unsatisfied(unsatisfied))
    }

    fn push_decision(
        &mut self,
        req: &AccessRequest,
        binding: Option<BindingId>,
        rules: PreconditionEval,
        verdict: Verdict,
        stage: MediationStage,
    ) {
        self.decisions.push(Decision {
            request_id: req.request_id,
            t: self.now,
            app_id: req.app_id.clone(),
            charged_app: req.charged_app().clone(),
            op: req.op,
            device: req.device,
            binding,
            exempt: matches!(self.gestures.mode(req.charged_app()), GestureMode::Exempt(_)),
            rules,
            verdict,
            stage,
        });
    }

    fn alert(&mut self, app: &AppId, op: OperationKind, device: DeviceId) {
        let name = self.registry.display_name(app);
        self.display.post_violation(app.clone(), name, op, device, self.now);
        self.sounds.push(SoundEvent { t: self.now, app_id: app.clone(), op, device });
    }

    // ---- gestures -------------------------------------------------------

    /// Feeds one input event through gesture identification. Returns the
    /// mediation outcomes the event resolved (parked requests, chord grants).
    pub fn on_gesture(&mut self, ev: GestureEvent) -> Vec<MediationOutcome> {
        self.emit_hook(HookKind::InputEvent(ev.kind.clone()));
        if ev.kind == GestureKind::PhysicalChord {
            return self.on_physical_chord().into_iter().collect();
        }
        let effect = self.gestures.on_gesture(&ev, self.registry.foreground());
        self.apply_gesture_effect(effect)
    }

    fn apply_gesture_effect(&mut self, effect: GestureEffect) -> Vec<MediationOutcome> {
        let mut out = Vec::new();
        match effect {
            GestureEffect::None => {}
            GestureEffect::Created(b) => self.post_pending(b),
            GestureEffect::Confirmed(b) => {
                let attached = self.gestures.binding(b).and_then(|p| p.attached);
                if let Some(req) = attached.and_then(|r| self.attached.remove(&r)) {
                    let eval = PreconditionEval {
                        p1: true,
                        p2: true,
                        p3: self.display.is_pending_displayed(b),
                        p4: true,
                    };
                    out.push(if eval.p3 { self.allow(req, eval, Some(b)) } else { self.block(req, eval, Some(b)) });
                }
            }
            GestureEffect::Aborted(b, reason) => {
                if let Some(o) = self.resolve_unapproved(b, DenyReason::Aborted(reason)) {
                    out.push(o);
                }
            }
            GestureEffect::SustainEnded { binding, inside } => {
                if let Some(sid) = self.gestures.binding(binding).and_then(|b| b.session) {
                    let reason = if inside { TerminationReason::UserReleased } else { TerminationReason::UserAborted };
                    if self.sessions.get(&sid).is_some_and(|s| s.is_active()) {
                        let _ = self.terminate(sid, reason);
                    }
                }
            }
        }
        out
    }

    fn post_pending(&mut self, b: BindingId) {
        let Some(p) = self.gestures.binding(b).cloned() else { return };
        let name = self.registry.display_name(&p.app_id);
        self.display.post_pending(
            SecurityMessage::new(MessageKind::Pending, p.app_id, name, p.op, p.device, MessageSubject::Binding(b)),
            self.now,
        );
    }

    /// Clean-up for a binding that ended without approval: the pending
    /// message goes away, a parked request is denied, and the denial is
    /// logged when the user actively refused or a request was waiting.
    fn resolve_unapproved(&mut self, b: BindingId, reason: DenyReason) -> Option<MediationOutcome> {
        self.display.remove_pending(b, self.now);
        let p: PendingOperation = self.gestures.binding(b).cloned()?;
        let parked = p.attached.and_then(|r| self.attached.remove(&r));
        let user_refused = reason == DenyReason::Aborted(AbortReason::SlideOut);
        if parked.is_some() || user_refused {
            self.log.append(LogCategory::Denied, p.app_id.clone(), p.op, p.device, self.now, LogDetail::Denied(reason));
        }
        parked.map(|req| self.deny(req, b))
    }

    /// Power + volume-down: a system-owned, pre-approved screenshot.
    pub fn on_physical_chord(&mut self) -> Option<MediationOutcome> {
        let system = AppId::new(SYSTEM_APP);
        let b = self.gestures.create_system_binding(system.clone(), self.now);
        self.post_pending(b);
        let mediation = self
            .intercept_request(RequestSpec::direct(system, OperationKind::CaptureScreenshot, DeviceId::ScreenBuffer))
            .ok()?;
        let outcome = mediation.outcome().cloned()?;
        if let OutcomeDetail::Session(sid) = outcome.detail {
            self.auto_release.insert(sid, self.now + SCREENSHOT_CAPTURE_MS);
        } else {
            self.gestures.abort(b, AbortReason::DeviceBusy, self.now);
            self.display.remove_pending(b, self.now);
        }
        Some(outcome)
    }

    // ---- sessions -------------------------------------------------------

    /// An app tells its service it is done with `device`.
    pub fn app_release(&mut self, app: &AppId, device: DeviceId) -> Result<SessionId, MonitorError> {
        let sid = self
            .devices
            .holder(device)
            .filter(|sid| self.sessions.get(sid).is_some_and(|s| &s.app_id == app))
            .ok_or_else(|| MonitorError::NotHolder { app: app.clone(), device })?;
        self.devices.release(device, sid, self.now, &mut self.hooks)?;
        self.terminate(sid, TerminationReason::AppReleased)?;
        Ok(sid)
    }

    /// Ends a session: releases its devices, logs the termination and takes
    /// its message out of the rotation.
    pub fn terminate(&mut self, sid: SessionId, reason: TerminationReason) -> Result<(), MonitorError> {
        let session = self.sessions.get(&sid).ok_or(MonitorError::UnknownSession(sid))?;
        if !session.is_active() {
            return Err(MonitorError::AlreadyTerminated(sid));
        }
        let (app, op, device, devices) = (session.app_id.clone(), session.op, session.device, session.devices.clone());
        for d in devices {
            if self.devices.holder(d) == Some(sid) {
                self.devices.release(d, sid, self.now, &mut self.hooks)?;
            }
        }
        self.log.append(
            LogCategory::Terminated,
            app,
            op,
            device,
            self.now,
            LogDetail::Terminated { session: sid, reason },
        );
        self.display.remove_ongoing(sid, self.now);
        self.auto_release.remove(&sid);
        if let Some(s) = self.sessions.get_mut(&sid) {
            s.state = SessionState::Terminated { reason, ended_t: self.now };
        }
        Ok(())
    }

    /// Re-checks the ongoing conditions of every active session. Sessions
    /// that lost visibility or their log record are terminated.
    pub fn monitor(&mut self) -> Vec<SessionId> {
        let violating: Vec<(SessionId, AppId, OperationKind, DeviceId)> = self
            .active_sessions()
            .filter(|s| !self.display.shows_ongoing(s.session_id) || !self.log.has_authorized(s.session_id))
            .map(|s| (s.session_id, s.app_id.clone(), s.op, s.device))
            .collect();
        for (sid, app, op, device) in &violating {
            let _ = self.terminate(*sid, TerminationReason::OngoingViolation);
            self.alert(app, *op, *device);
        }
        violating.into_iter().map(|v| v.0).collect()
    }

    // ---- retrospective actions ------------------------------------------

    pub fn apply_retro_action(&mut self, action: RetroAction) -> Result<(), MonitorError> {
        self.registry.get(&action.app_id)?;
        let app = action.app_id.clone();
        let affected: Vec<SessionId> = self
            .active_sessions()
            .filter(|s| s.app_id == app)
            .filter(|s| match &action.kind {
                RetroKind::Uninstall => true,
                RetroKind::RevokePermission(p) => s.op.required_permissions().contains(*p),
            })
            .map(|s| s.session_id)
            .collect();
        for sid in &affected {
            self.terminate(*sid, TerminationReason::RetroRevoked)?;
        }
        match &action.kind {
            RetroKind::Uninstall => {
                if let Some(b) = self.gestures.drop_app(&app, self.now) {
                    self.resolve_unapproved(b, DenyReason::Aborted(AbortReason::AppUninstalled));
                }
                self.registry.uninstall(&app)?;
            }
            RetroKind::RevokePermission(p) => {
                self.registry.get_mut(&app)?.granted_permissions.remove(*p);
            }
        }
        self.log.record_retro(RetroRecord { action, terminated: affected });
        Ok(())
    }

    // ---- time -----------------------------------------------------------

    /// Next instant at which state changes without an external event.
    pub fn next_wakeup(&self) -> Option<Millis> {
        [
            self.gestures.next_deadline(),
            self.display.next_wakeup(),
            self.auto_release.values().min().copied(),
        ]
        .into_iter()
        .flatten()
        .min()
    }

    /// Moves virtual time to `now` and fires every timer due at or before it:
    /// binding expiry, automatic releases, violation display and rotation.
    pub fn advance_timers(&mut self, now: Millis) -> Vec<MediationOutcome> {
        debug_assert!(now >= self.now, "virtual time is monotone");
        self.now = self.now.max(now);
        let mut out = Vec::new();
        for b in self.gestures.expire_due(self.now) {
            if let Some(o) = self.resolve_unapproved(b, DenyReason::Expired) {
                out.push(o);
            }
        }
        let due: Vec<SessionId> = self
            .auto_release
            .iter()
            .filter(|(_, at)| **at <= self.now)
            .map(|(s, _)| *s)
            .collect();
        for sid in due {
            self.auto_release.remove(&sid);
            if let Some(s) = self.sessions.get(&sid).filter(|s| s.is_active()) {
                let (app, device) = (s.app_id.clone(), s.device);
                let _ = self.app_release(&app, device);
            }
        }
        self.display.tick(self.now);
        out
    }

    /// A clock tick: timers, one frame of data to every device holder, and
    /// the ongoing-condition check.
    pub fn tick(&mut self, now: Millis) -> Vec<MediationOutcome> {
        let out = self.advance_timers(now);
        let held: Vec<(DeviceId, SessionId)> = self.devices.held().collect();
        for (device, session) in held {
            self.emit_hook(HookKind::SensorRead { device, session });
        }
        self.monitor();
        out
    }

    /// Closes everything still open: active sessions end and live bindings expire.
    pub fn shutdown(&mut self) -> Vec<MediationOutcome> {
        let active: Vec<SessionId> = self.active_sessions().map(|s| s.session_id).collect();
        for sid in active {
            let _ = self.terminate(sid, TerminationReason::SimulationEnd);
        }
        let mut out = Vec::new();
        let live: Vec<BindingId> = self
            .gestures
            .bindings()
            .filter(|b| b.phase.is_live())
            .map(|b| b.binding_id)
            .collect();
        for b in live {
            self.gestures.abort_as_expired(b, self.now);
            if let Some(o) = self.resolve_unapproved(b, DenyReason::Expired) {
                out.push(o);
            }
        }
        out
    }
}
