//! Built-in scenarios: benign tasks, stealthy attacks, hijack attempts and
//! the 1080-attempt replay. Each carries the expectations `run` checks.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::device::{
    AppDescriptor, ConfirmMode, DeviceId, Lifecycle, OperationKind, Permission, PermissionSet,
    SoftButton,
};
use crate::display::MessageKind;
use crate::gesture::GestureKind;
use crate::hooks::RequestSpec;
use crate::ids::AppId;
use crate::sim::{EventKind, ScenarioEvent, SimulationReport, TraceBuilder};
use crate::Millis;

pub const BUILTIN_NAMES: [&str; 15] = [
    "T1",
    "T2",
    "T3",
    "T4",
    "T5",
    "T10",
    "A1_stealthy_photo",
    "A2_stealthy_audio",
    "A3_stealthy_video",
    "A4_stealthy_photos_burst",
    "A5_hijack_screenshot",
    "A5_hijack_screenshot_inattentive",
    "A6_hijack_audio",
    "A6_hijack_audio_inattentive",
    "RAT_1080",
];

/// Number of stealthy attempts in the RAT replay.
pub const RAT_ATTEMPTS: usize = 1080;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown scenario {0:?}")]
pub struct UnknownScenario(pub String);

/// Expected totals after a run. Every field is checked exactly.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectations {
    pub granted: u64,
    pub blocked: u64,
    pub denied: u64,
    pub authorized: u64,
    pub terminated: u64,
    pub violation_alerts: u64,
    /// (op, device) of every session, in creation order.
    pub session_ops: Vec<(OperationKind, DeviceId)>,
    /// (op, device) named by pending messages shown during the run, in order of first appearance.
    pub pending_ops: Vec<(OperationKind, DeviceId)>,
}

impl Expectations {
    /// Human-readable list of mismatches; empty when the report meets every expectation.
    pub fn check(&self, r: &SimulationReport) -> Vec<String> {
        let mut failures = Vec::new();
        let mut eq = |what: &str, want: u64, got: u64| {
            if want != got {
                failures.push(format!("{what}: expected {want}, got {got}"));
            }
        };
        let s = &r.summary;
        eq("granted", self.granted, s.granted);
        eq("blocked", self.blocked, s.log_blocked);
        eq("denied", self.denied, s.log_denied);
        eq("authorized", self.authorized, s.log_authorized);
        eq("terminated", self.terminated, s.log_terminated);
        eq("violation alerts", self.violation_alerts, s.violation_alerts);
        let sessions: Vec<_> = r.sessions.iter().map(|s| (s.op, s.device)).collect();
        if sessions != self.session_ops {
            failures.push(format!("sessions: expected {:?}, got {:?}", self.session_ops, sessions));
        }
        let pending = pending_ops_shown(r);
        if pending != self.pending_ops {
            failures.push(format!("pending messages: expected {:?}, got {:?}", self.pending_ops, pending));
        }
        failures
    }
}

/// (op, device) of each distinct pending message that reached the bar.
pub fn pending_ops_shown(r: &SimulationReport) -> Vec<(OperationKind, DeviceId)> {
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for e in &r.timeline {
        if let Some(m) = e.bar.current_message.as_ref().filter(|m| m.kind == MessageKind::Pending) {
            if !seen.contains(&m.subject) {
                seen.push(m.subject);
                out.push((m.op, m.device));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub events: Vec<ScenarioEvent>,
    pub expect: Expectations,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UserBehavior {
    /// Reads the status bar, notices the mismatch and slides out.
    Attentive,
    /// Releases on the button without reading the bar.
    Inattentive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HijackKind {
    /// Button says "Record video"; the app takes a screenshot.
    Screenshot,
    /// Button says "Take photo"; the app records audio.
    Audio,
}

pub fn builtin_scenario(name: &str) -> Result<Scenario, UnknownScenario> {
    Ok(match name {
        "T1" => benign("T1", "Take a picture with Instagram", "com.instagram", "Instagram", OperationKind::TakePhoto, DeviceId::BackCamera, ConfirmMode::ReleaseToConfirm, 800),
        "T2" => benign("T2", "Take a video with Fideo (hold to record)", "com.fideo", "Fideo", OperationKind::RecordVideo, DeviceId::BackCamera, ConfirmMode::HoldToSustain, 4_000),
        "T3" => benign("T3", "Record a voice message with Messenger (hold to talk)", "com.messenger", "Messenger", OperationKind::RecordAudio, DeviceId::Microphone, ConfirmMode::HoldToSustain, 3_000),
        "T4" => benign("T4", "Record a video message with Skype", "com.skype", "Skype", OperationKind::RecordVideo, DeviceId::FrontCamera, ConfirmMode::ReleaseToConfirm, 6_000),
        "T5" => benign("T5", "Record the device screen with Rec.", "com.rec", "Rec.", OperationKind::RecordScreen, DeviceId::ScreenBuffer, ConfirmMode::ReleaseToConfirm, 5_000),
        "T10" => chord_screenshot(),
        "A1_stealthy_photo" => stealthy("A1_stealthy_photo", "Krysanec takes a photo while the user browses", rat_krysanec(), browser(), vec![(OperationKind::TakePhoto, DeviceId::BackCamera)]),
        "A2_stealthy_audio" => stealthy("A2_stealthy_audio", "Soundcomber records audio while the user watches a video", rat_soundcomber(), video_player(), vec![(OperationKind::RecordAudio, DeviceId::Microphone)]),
        "A3_stealthy_video" => stealthy("A3_stealthy_video", "Dendroid records video while the user adds a contact", rat_dendroid(), contacts(), vec![(OperationKind::RecordVideo, DeviceId::FrontCamera)]),
        "A4_stealthy_photos_burst" => stealthy("A4_stealthy_photos_burst", "PlaceRaider takes photos while the user writes an email", rat_placeraider(), mail(), vec![(OperationKind::TakePhoto, DeviceId::BackCamera)]),
        "A5_hijack_screenshot" => hijack(HijackKind::Screenshot, UserBehavior::Attentive),
        "A5_hijack_screenshot_inattentive" => hijack(HijackKind::Screenshot, UserBehavior::Inattentive),
        "A6_hijack_audio" => hijack(HijackKind::Audio, UserBehavior::Attentive),
        "A6_hijack_audio_inattentive" => hijack(HijackKind::Audio, UserBehavior::Inattentive),
        "RAT_1080" => rat_replay(),
        other => return Err(UnknownScenario(other.into())),
    })
}

fn all_permissions() -> PermissionSet {
    PermissionSet::of(&Permission::ALL)
}

fn app(id: &str, name: &str, perms: PermissionSet, buttons: Vec<SoftButton>) -> AppDescriptor {
    AppDescriptor {
        app_id: AppId::new(id),
        display_name: name.into(),
        granted_permissions: perms,
        soft_buttons: buttons,
        lifecycle: Lifecycle::NotRunning,
    }
}

fn button(id: &str, label: &str, op: OperationKind, device: DeviceId, mode: ConfirmMode) -> SoftButton {
    SoftButton {
        button_id: id.into(),
        label_text: label.into(),
        declared_op: op,
        declared_device: device,
        confirm_mode: mode,
    }
}

fn press(b: &mut TraceBuilder, t: Millis, button: &str) {
    b.at(t, EventKind::Gesture(GestureKind::PointerDown { button: Some(button.into()) }));
}

fn request(b: &mut TraceBuilder, t: Millis, app: &str, op: OperationKind, device: DeviceId) {
    b.at(t, EventKind::AppRequest(RequestSpec::direct(app, op, device)));
}

fn label_for(op: OperationKind) -> &'static str {
    match op {
        OperationKind::TakePhoto => "Shutter",
        OperationKind::RecordVideo => "Record",
        OperationKind::RecordAudio => "Hold to talk",
        OperationKind::CaptureScreenshot => "Screenshot",
        OperationKind::RecordScreen => "Start recording",
    }
}

#[allow(clippy::too_many_arguments)]
fn benign(
    name: &str,
    description: &str,
    app_id: &str,
    display: &str,
    op: OperationKind,
    device: DeviceId,
    mode: ConfirmMode,
    duration: Millis,
) -> Scenario {
    let mut b = TraceBuilder::new();
    let perms = op.required_permissions();
    b.at(0, EventKind::InstallApp(app(app_id, display, perms, vec![button("main", label_for(op), op, device, mode)])));
    b.at(500, EventKind::SetForeground { app_id: app_id.into() });
    press(&mut b, 1_000, "main");
    match mode {
        ConfirmMode::ReleaseToConfirm => {
            b.at(1_400, EventKind::Gesture(GestureKind::PointerUp));
            request(&mut b, 1_450, app_id, op, device);
            b.at(1_450 + duration, EventKind::AppRelease { app_id: app_id.into(), device });
        }
        ConfirmMode::HoldToSustain => {
            request(&mut b, 1_050, app_id, op, device);
            b.at(1_050 + duration, EventKind::Gesture(GestureKind::PointerUp));
        }
    }
    Scenario {
        name: name.into(),
        description: description.into(),
        events: b.build(),
        expect: Expectations {
            granted: 1,
            authorized: 1,
            terminated: 1,
            session_ops: vec![(op, device)],
            pending_ops: vec![(op, device)],
            ..Expectations::default()
        },
    }
}

fn chord_screenshot() -> Scenario {
    let mut b = TraceBuilder::new();
    b.at(0, EventKind::InstallApp(browser()));
    b.at(500, EventKind::SetForeground { app_id: "com.browser".into() });
    b.at(2_000, EventKind::Gesture(GestureKind::PhysicalChord));
    let op = (OperationKind::CaptureScreenshot, DeviceId::ScreenBuffer);
    Scenario {
        name: "T10".into(),
        description: "Take a screenshot with power + volume-down".into(),
        events: b.build(),
        expect: Expectations {
            granted: 1,
            authorized: 1,
            terminated: 1,
            session_ops: vec![op],
            ..Expectations::default()
        },
    }
}

fn browser() -> AppDescriptor {
    app("com.browser", "Browser", PermissionSet::of(&[Permission::Internet]), Vec::new())
}

fn video_player() -> AppDescriptor {
    app("com.videos", "Videos", PermissionSet::of(&[Permission::Internet]), Vec::new())
}

fn contacts() -> AppDescriptor {
    app("com.contacts", "Contacts", PermissionSet::EMPTY, Vec::new())
}

fn mail() -> AppDescriptor {
    app("com.mail", "Mail", PermissionSet::of(&[Permission::Internet]), Vec::new())
}

/// Camera, audio and storage: the RAT permission profile.
fn rat(id: &str, name: &str) -> AppDescriptor {
    app(id, name, all_permissions(), Vec::new())
}

fn rat_krysanec() -> AppDescriptor {
    rat("rat.krysanec", "Krysanec")
}

fn rat_soundcomber() -> AppDescriptor {
    rat("rat.soundcomber", "Soundcomber")
}

fn rat_dendroid() -> AppDescriptor {
    rat("rat.dendroid", "Dendroid")
}

fn rat_placeraider() -> AppDescriptor {
    rat("rat.placeraider", "PlaceRaider")
}

fn stealthy(
    name: &str,
    description: &str,
    rat: AppDescriptor,
    cover: AppDescriptor,
    attempts: Vec<(OperationKind, DeviceId)>,
) -> Scenario {
    let mut b = TraceBuilder::new();
    let (rat_id, cover_id) = (rat.app_id.clone(), cover.app_id.clone());
    b.at(0, EventKind::InstallApp(rat));
    b.at(0, EventKind::InstallApp(cover));
    b.at(100, EventKind::SetBackground { app_id: rat_id.clone() });
    b.at(500, EventKind::SetForeground { app_id: cover_id });
    for (i, (op, device)) in attempts.iter().enumerate() {
        request(&mut b, 2_000 + i as Millis * 500, rat_id.as_str(), *op, *device);
    }
    let n = attempts.len() as u64;
    Scenario {
        name: name.into(),
        description: description.into(),
        events: b.build(),
        expect: Expectations { blocked: n, violation_alerts: n, ..Expectations::default() },
    }
}

/// The SimpleFilters-style hijack. The button's label advertises one
/// operation while the button is registered for the one the app really
/// performs, and the app issues its request while the finger is still down.
pub fn hijack(kind: HijackKind, user: UserBehavior) -> Scenario {
    let (label, op, device, suffix) = match kind {
        HijackKind::Screenshot => ("Record video", OperationKind::CaptureScreenshot, DeviceId::ScreenBuffer, "A5_hijack_screenshot"),
        HijackKind::Audio => ("Take photo", OperationKind::RecordAudio, DeviceId::Microphone, "A6_hijack_audio"),
    };
    let id = "com.simplefilters";
    let mut b = TraceBuilder::new();
    b.at(0, EventKind::InstallApp(app(
        id,
        "SimpleFilters",
        all_permissions(),
        vec![button("action", label, op, device, ConfirmMode::ReleaseToConfirm)],
    )));
    b.at(500, EventKind::SetForeground { app_id: id.into() });
    press(&mut b, 1_000, "action");
    request(&mut b, 1_100, id, op, device);
    let mut expect = Expectations { pending_ops: vec![(op, device)], ..Expectations::default() };
    let name = match user {
        UserBehavior::Attentive => {
            b.at(2_000, EventKind::Gesture(GestureKind::PointerMove { inside: false }));
            b.at(2_200, EventKind::Gesture(GestureKind::PointerUp));
            expect.denied = 1;
            String::from(suffix)
        }
        UserBehavior::Inattentive => {
            b.at(1_500, EventKind::Gesture(GestureKind::PointerUp));
            b.at(3_000, EventKind::AppRelease { app_id: id.into(), device });
            expect.granted = 1;
            expect.authorized = 1;
            expect.terminated = 1;
            expect.session_ops = vec![(op, device)];
            format!("{suffix}_inattentive")
        }
    };
    Scenario {
        description: format!("Button labelled {label:?} performs {}", op.as_str()),
        name,
        events: b.build(),
        expect,
    }
}

fn rat_replay() -> Scenario {
    let rats: [(AppDescriptor, &[(OperationKind, DeviceId)]); 4] = [
        (rat_krysanec(), &[(OperationKind::TakePhoto, DeviceId::BackCamera), (OperationKind::RecordAudio, DeviceId::Microphone)]),
        (rat_soundcomber(), &[(OperationKind::RecordAudio, DeviceId::Microphone)]),
        (
            rat_dendroid(),
            &[
                (OperationKind::TakePhoto, DeviceId::FrontCamera),
                (OperationKind::RecordVideo, DeviceId::BackCamera),
                (OperationKind::RecordAudio, DeviceId::Microphone),
                (OperationKind::CaptureScreenshot, DeviceId::ScreenBuffer),
            ],
        ),
        (rat_placeraider(), &[(OperationKind::TakePhoto, DeviceId::BackCamera), (OperationKind::TakePhoto, DeviceId::FrontCamera)]),
    ];
    let mut b = TraceBuilder::new();
    for (r, _) in &rats {
        b.at(0, EventKind::InstallApp(r.clone()));
    }
    b.at(0, EventKind::InstallApp(mail()));
    b.at(100, EventKind::SetForeground { app_id: "com.mail".into() });
    for i in 0..RAT_ATTEMPTS {
        let (r, ops) = &rats[i % rats.len()];
        let (op, device) = ops[(i / rats.len()) % ops.len()];
        request(&mut b, 1_000 + i as Millis * 50, r.app_id.as_str(), op, device);
    }
    let n = RAT_ATTEMPTS as u64;
    Scenario {
        name: "RAT_1080".into(),
        description: "Four RAT apps attempt 1080 stealthy operations in the background".into(),
        events: b.build(),
        expect: Expectations { blocked: n, violation_alerts: n, ..Expectations::default() },
    }
}
