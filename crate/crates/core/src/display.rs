//! The status-bar channel for security messages.
//!
//! Only this module writes the status bar. Message text is produced from the
//! operation, the device and the registry display name of the app; the text an
//! app draws on its own buttons never reaches the bar.
//!
//! Precedence: pending messages, then violation messages (FIFO, each shown for
//! `violation_display_ms`), then the round-robin rotation of ongoing sessions.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::device::{DeviceId, OperationKind};
use crate::ids::{AppId, BindingId, SessionId};
use crate::Millis;

pub const DEFAULT_ALTERNATION_MS: Millis = 2_000;
pub const DEFAULT_VIOLATION_DISPLAY_MS: Millis = 3_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    Pending,
    Ongoing,
    Violation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageSubject {
    Binding(BindingId),
    Session(SessionId),
    Violation(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityMessage {
    pub kind: MessageKind,
    pub app_id: AppId,
    pub app_display_name: String,
    pub op: OperationKind,
    pub device: DeviceId,
    pub subject: MessageSubject,
    pub text: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScreenMode {
    #[default]
    Normal,
    LeanBack,
    Immersive,
}

/// Immutable view of the bar, as recorded in reports and bridge snapshots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusBarState {
    pub visible: bool,
    pub current_message: Option<SecurityMessage>,
    pub rotation: Vec<SecurityMessage>,
    pub screen_mode: ScreenMode,
}

fn verb(op: OperationKind, ongoing: bool) -> &'static str {
    match (op, ongoing) {
        (OperationKind::TakePhoto, false) => "Take photo",
        (OperationKind::TakePhoto, true) => "Taking photo",
        (OperationKind::RecordVideo, false) => "Record video",
        (OperationKind::RecordVideo, true) => "Recording video",
        (OperationKind::RecordAudio, false) => "Record audio",
        (OperationKind::RecordAudio, true) => "Recording audio",
        (OperationKind::CaptureScreenshot, false) => "Take screenshot",
        (OperationKind::CaptureScreenshot, true) => "Taking screenshot",
        (OperationKind::RecordScreen, false) => "Record screen",
        (OperationKind::RecordScreen, true) => "Recording screen",
    }
}

/// Verb phrase for an operation on a device, with `(F)`/`(B)` for cameras.
pub fn op_text(op: OperationKind, device: DeviceId, ongoing: bool) -> String {
    let v = verb(op, ongoing);
    match device {
        DeviceId::FrontCamera => format!("{v} (F)"),
        DeviceId::BackCamera => format!("{v} (B)"),
        _ => v.into(),
    }
}

/// Full message text. Depends only on the kind, the operation, the device and
/// the app's registry name.
pub fn message_text(kind: MessageKind, display_name: &str, op: OperationKind, device: DeviceId) -> String {
    match kind {
        MessageKind::Pending => format!("{display_name} \u{2014} {}?", op_text(op, device, false)),
        MessageKind::Ongoing => format!("{display_name} \u{2014} {}", op_text(op, device, true)),
        MessageKind::Violation => {
            format!("{display_name} \u{2014} Blocked: {}", op_text(op, device, false))
        }
    }
}

impl SecurityMessage {
    pub fn new(
        kind: MessageKind,
        app_id: AppId,
        display_name: String,
        op: OperationKind,
        device: DeviceId,
        subject: MessageSubject,
    ) -> Self {
        let text = message_text(kind, &display_name, op, device);
        Self { kind, app_id, app_display_name: display_name, op, device, subject, text }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayConfig {
    pub alternation_ms: Millis,
    pub violation_display_ms: Millis,
}

impl Default for DisplayConfig {
    fn default() -> Self {
        Self {
            alternation_ms: DEFAULT_ALTERNATION_MS,
            violation_display_ms: DEFAULT_VIOLATION_DISPLAY_MS,
        }
    }
}

/// A write to the bar from outside the monitor. Always rejected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedWrite {
    pub t: Millis,
    pub writer: AppId,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("status bar is writable only by the monitor (write from {writer} rejected)")]
pub struct WriteRejected {
    pub writer: AppId,
}

#[derive(Clone, Debug)]
pub struct SecurityDisplay {
    config: DisplayConfig,
    mode: ScreenMode,
    pending: Vec<SecurityMessage>,
    rotation: Vec<SecurityMessage>,
    rot_idx: usize,
    rot_since: Millis,
    rot_showing: bool,
    violations: VecDeque<SecurityMessage>,
    violation_since: Option<Millis>,
    next_violation: u64,
    suppressed: bool,
    current: Option<SecurityMessage>,
    rejected: Vec<RejectedWrite>,
}

impl SecurityDisplay {
    pub fn new(config: DisplayConfig) -> Self {
        Self {
            config,
            mode: ScreenMode::Normal,
            pending: Vec::new(),
            rotation: Vec::new(),
            rot_idx: 0,
            rot_since: 0,
            rot_showing: false,
            violations: VecDeque::new(),
            violation_since: None,
            next_violation: 1,
            suppressed: false,
            current: None,
            rejected: Vec::new(),
        }
    }

    pub fn config(&self) -> DisplayConfig {
        self.config
    }

    /// Shows the pending message for a held binding. Full-screen modes do not
    /// hide it: the bar is forced visible while a pending message exists.
    pub fn post_pending(&mut self, msg: SecurityMessage, now: Millis) {
        debug_assert_eq!(msg.kind, MessageKind::Pending);
        self.pending.retain(|m| m.subject != msg.subject);
        self.pending.push(msg);
        self.refresh(now);
    }

    pub fn remove_pending(&mut self, binding: BindingId, now: Millis) {
        self.pending.retain(|m| m.subject != MessageSubject::Binding(binding));
        self.refresh(now);
    }

    pub fn is_pending_displayed(&self, binding: BindingId) -> bool {
        self.visible() && self.pending.iter().any(|m| m.subject == MessageSubject::Binding(binding))
    }

    pub fn add_ongoing(&mut self, msg: SecurityMessage, now: Millis) {
        debug_assert_eq!(msg.kind, MessageKind::Ongoing);
        // A lone message does not rotate, so its clock starts over here.
        if self.rotation.len() <= 1 {
            self.rot_since = now;
        }
        if self.rotation.is_empty() {
            self.rot_idx = 0;
        }
        self.rotation.push(msg);
        self.refresh(now);
    }

    pub fn remove_ongoing(&mut self, session: SessionId, now: Millis) {
        let Some(pos) = self.rotation.iter().position(|m| m.subject == MessageSubject::Session(session)) else {
            return;
        };
        self.rotation.remove(pos);
        if pos < self.rot_idx {
            self.rot_idx -= 1;
        } else if pos == self.rot_idx {
            self.rot_since = now;
        }
        if self.rot_idx >= self.rotation.len() {
            self.rot_idx = 0;
        }
        self.refresh(now);
    }

    /// Ongoing message for `session` is in the rotation and the channel renders it.
    pub fn shows_ongoing(&self, session: SessionId) -> bool {
        !self.suppressed && self.rotation.iter().any(|m| m.subject == MessageSubject::Session(session))
    }

    /// Queues a violation message. Returns its id.
    pub fn post_violation(
        &mut self,
        app_id: AppId,
        display_name: String,
        op: OperationKind,
        device: DeviceId,
        now: Millis,
    ) -> u64 {
        let id = self.next_violation;
        self.next_violation += 1;
        self.violations.push_back(SecurityMessage::new(
            MessageKind::Violation,
            app_id,
            display_name,
            op,
            device,
            MessageSubject::Violation(id),
        ));
        self.refresh(now);
        id
    }

    pub fn set_screen_mode(&mut self, mode: ScreenMode, now: Millis) {
        self.mode = mode;
        self.refresh(now);
    }

    pub fn screen_mode(&self) -> ScreenMode {
        self.mode
    }

    /// Fault injection: the channel stops rendering ongoing messages.
    pub fn set_suppressed(&mut self, suppressed: bool, now: Millis) {
        self.suppressed = suppressed;
        self.refresh(now);
    }

    pub fn is_suppressed(&self) -> bool {
        self.suppressed
    }

    /// Entry point for anything other than the monitor trying to draw on the bar.
    pub fn untrusted_write(&mut self, writer: AppId, text: String, now: Millis) -> Result<(), WriteRejected> {
        self.rejected.push(RejectedWrite { t: now, writer: writer.clone(), text });
        Err(WriteRejected { writer })
    }

    pub fn rejected_writes(&self) -> &[RejectedWrite] {
        &self.rejected
    }

    /// Advances violation display and rotation to `now`.
    pub fn tick(&mut self, now: Millis) {
        self.refresh(now);
    }

    /// Next instant at which the bar content changes on its own.
    pub fn next_wakeup(&self) -> Option<Millis> {
        if !self.pending.is_empty() {
            return None;
        }
        if let Some(since) = self.violation_since {
            return Some(since + self.config.violation_display_ms);
        }
        if self.rot_showing && self.rotation.len() > 1 {
            return Some(self.rot_since + self.config.alternation_ms);
        }
        None
    }

    fn refresh(&mut self, now: Millis) {
        if self.pending.is_empty() {
            while let Some(since) = self.violation_since {
                if now >= since + self.config.violation_display_ms {
                    self.violations.pop_front();
                    self.violation_since = if self.violations.is_empty() {
                        None
                    } else {
                        Some(since + self.config.violation_display_ms)
                    };
                } else {
                    break;
                }
            }
            if self.violation_since.is_none() && !self.violations.is_empty() {
                self.violation_since = Some(now);
            }
        }

        let rotation_shown = self.pending.is_empty()
            && self.violations.is_empty()
            && !self.suppressed
            && !self.rotation.is_empty();
        // The rotation clock keeps running while something else holds the
        // bar; restarting it on every preemption would let a burst of short
        // preemptions pin one session on screen.
        if rotation_shown {
            let period = self.config.alternation_ms.max(1);
            if self.rotation.len() > 1 && now >= self.rot_since + period {
                let steps = (now - self.rot_since) / period;
                self.rot_idx = (self.rot_idx + steps as usize) % self.rotation.len();
                self.rot_since += steps * period;
            }
        }
        self.rot_showing = rotation_shown;

        self.current = if let Some(p) = self.pending.first() {
            Some(p.clone())
        } else if let Some(v) = self.violations.front() {
            Some(v.clone())
        } else if rotation_shown {
            Some(self.rotation[self.rot_idx].clone())
        } else {
            None
        };
    }

    pub fn visible(&self) -> bool {
        self.mode == ScreenMode::Normal || self.current.is_some()
    }

    pub fn current(&self) -> Option<&SecurityMessage> {
        self.current.as_ref()
    }

    pub fn snapshot(&self) -> StatusBarState {
        StatusBarState {
            visible: self.visible(),
            current_message: self.current.clone(),
            rotation: self.rotation.clone(),
            screen_mode: self.mode,
        }
    }
}
