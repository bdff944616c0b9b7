use aware_core::device::{
    AppDescriptor, ConfirmMode, DeviceId, Lifecycle, OperationKind, Permission, PermissionSet,
    SoftButton, SystemServiceId,
};
use aware_core::display::{MessageKind, ScreenMode};
use aware_core::engine::{FaultKind, Monitor, MonitorConfig, MonitorError, SessionState, Verdict, SYSTEM_APP};
use aware_core::gesture::{ExemptReason, GestureEvent, GestureKind, GestureMode, Phase};
use aware_core::hooks::{HookKind, Mediation, MediationStage, OutcomeDetail, Origin, RequestSpec};
use aware_core::log::{LogCategory, LogDetail, LogFilter, RetroAction, RetroKind, TerminationReason};
use aware_core::rules::{RuleId, RuleSet};
use aware_core::{AppId, Millis, SessionId};

use OperationKind::*;

fn button(id: &str, op: OperationKind, device: DeviceId, mode: ConfirmMode) -> SoftButton {
    SoftButton {
        button_id: id.into(),
        label_text: format!("label {id}"),
        declared_op: op,
        declared_device: device,
        confirm_mode: mode,
    }
}

fn app(id: &str, name: &str, perms: &[Permission], buttons: Vec<SoftButton>) -> AppDescriptor {
    AppDescriptor {
        app_id: AppId::new(id),
        display_name: name.into(),
        granted_permissions: PermissionSet::of(perms),
        soft_buttons: buttons,
        lifecycle: Lifecycle::NotRunning,
    }
}

const ALL: [Permission; 4] = Permission::ALL;

/// Monitor with a foreground camera app "insta" and a background "rat".
fn world() -> Monitor {
    let mut m = Monitor::new(MonitorConfig::default());
    m.install_app(app(
        "insta",
        "Instagram",
        &ALL,
        vec![
            button("photo", TakePhoto, DeviceId::FrontCamera, ConfirmMode::ReleaseToConfirm),
            button("video", RecordVideo, DeviceId::BackCamera, ConfirmMode::HoldToSustain),
            button("shot", CaptureScreenshot, DeviceId::ScreenBuffer, ConfirmMode::ReleaseToConfirm),
        ],
    ))
    .unwrap();
    m.install_app(app("rat", "Rat", &ALL, vec![])).unwrap();
    m.set_foreground(&"insta".into()).unwrap();
    m.set_background(&"rat".into()).unwrap();
    m
}

fn gesture(m: &mut Monitor, t: Millis, kind: GestureKind) {
    m.advance_timers(t);
    m.on_gesture(GestureEvent { kind, t });
}

fn press(m: &mut Monitor, t: Millis, b: &str) {
    gesture(m, t, GestureKind::PointerDown { button: Some(b.into()) });
}

fn request(m: &mut Monitor, t: Millis, app: &str, op: OperationKind, device: DeviceId) -> Mediation {
    m.advance_timers(t);
    m.intercept_request(RequestSpec::direct(app, op, device)).unwrap()
}

fn stage(m: &Mediation) -> MediationStage {
    m.outcome().expect("decided").stage
}

fn session_of(m: &Mediation) -> SessionId {
    match m.outcome().map(|o| &o.detail) {
        Some(OutcomeDetail::Session(s)) => *s,
        other => panic!("not granted: {other:?}"),
    }
}

fn photo_session(m: &mut Monitor, t: Millis) -> SessionId {
    press(m, t, "photo");
    gesture(m, t + 200, GestureKind::PointerUp);
    session_of(&request(m, t + 250, "insta", TakePhoto, DeviceId::FrontCamera))
}

fn p1p4() -> RuleSet {
    RuleSet::of(&[RuleId::P1, RuleId::P4])
}

#[test]
fn background_request_without_gesture_is_blocked_on_p1_p4() {
    let mut m = world();
    let r = request(&mut m, 100, "rat", TakePhoto, DeviceId::BackCamera);
    assert_eq!(r.outcome().unwrap().detail, OutcomeDetail::Unsatisfied(p1p4()));
    assert_eq!(stage(&r), MediationStage::AwareBlocked);
    let d = &m.decisions()[0];
    assert!(!d.rules.p1 && d.rules.p2 && !d.rules.p4);
    assert_eq!(m.log().count(LogCategory::Blocked), 1);
    assert_eq!(m.sounds().len(), 1);
    assert_eq!(m.display().current().unwrap().kind, MessageKind::Violation);
}

#[test]
fn missing_permission_short_circuits_before_the_engine() {
    let mut m = world();
    m.install_app(app("noperm", "NoPerm", &[Permission::WriteExternalStorage], vec![])).unwrap();
    let r = request(&mut m, 10, "noperm", TakePhoto, DeviceId::BackCamera);
    assert_eq!(stage(&r), MediationStage::ConventionalDenied);
    assert_eq!(r.outcome().unwrap().detail, OutcomeDetail::MissingPermissions(PermissionSet::of(&[Permission::Camera])));
    assert!(m.decisions().is_empty());
    assert!(m.log().entries().is_empty());
}

#[test]
fn unknown_app_request_is_an_error() {
    let mut m = world();
    let err = m.intercept_request(RequestSpec::direct("ghost", TakePhoto, DeviceId::BackCamera)).unwrap_err();
    assert!(matches!(err, MonitorError::Registry(_)));
}

#[test]
fn confirmed_gesture_grants_and_shows_ongoing_message() {
    let mut m = world();
    press(&mut m, 100, "photo");
    assert_eq!(m.display().current().unwrap().text, "Instagram \u{2014} Take photo (F)?");
    gesture(&mut m, 300, GestureKind::PointerUp);
    let r = request(&mut m, 350, "insta", TakePhoto, DeviceId::FrontCamera);
    let sid = session_of(&r);
    assert_eq!(m.display().current().unwrap().text, "Instagram \u{2014} Taking photo (F)");
    assert_eq!(m.devices().holder(DeviceId::FrontCamera), Some(sid));
    assert!(m.log().has_authorized(sid));
    assert_eq!(m.decisions()[0].verdict, Verdict::Allow(sid));
    assert!(m.decisions()[0].rules.all_satisfied());
}

#[test]
fn request_for_other_operation_than_the_gesture_is_blocked() {
    let mut m = world();
    press(&mut m, 100, "photo");
    let r = request(&mut m, 150, "insta", RecordAudio, DeviceId::Microphone);
    assert_eq!(r.outcome().unwrap().detail, OutcomeDetail::Unsatisfied(p1p4()));
    // The pending message still describes only the photo binding.
    let cur = m.display().current().unwrap();
    assert_eq!((cur.kind, cur.op), (MessageKind::Pending, TakePhoto));
}

#[test]
fn request_during_hold_waits_for_release() {
    let mut m = world();
    press(&mut m, 100, "photo");
    let r = request(&mut m, 150, "insta", TakePhoto, DeviceId::FrontCamera);
    assert!(matches!(r, Mediation::Deferred { .. }));
    assert!(m.outcomes().is_empty());
    m.advance_timers(400);
    let out = m.on_gesture(GestureEvent { kind: GestureKind::PointerUp, t: 400 });
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].stage, MediationStage::Granted);
}

#[test]
fn second_request_on_one_binding_loses_on_p4() {
    let mut m = world();
    press(&mut m, 100, "photo");
    let first = request(&mut m, 150, "insta", TakePhoto, DeviceId::FrontCamera);
    let second = request(&mut m, 160, "insta", TakePhoto, DeviceId::FrontCamera);
    let Mediation::Deferred { request_id, .. } = first else { panic!("first should wait") };
    assert_eq!(second.outcome().unwrap().detail, OutcomeDetail::Unsatisfied(RuleSet::of(&[RuleId::P4])));
    m.advance_timers(300);
    let out = m.on_gesture(GestureEvent { kind: GestureKind::PointerUp, t: 300 });
    assert_eq!(out[0].request_id, request_id);
    assert_eq!(out[0].stage, MediationStage::Granted);
}

#[test]
fn binding_authorizes_exactly_one_request() {
    let mut m = world();
    let sid = photo_session(&mut m, 100);
    m.app_release(&"insta".into(), DeviceId::FrontCamera).unwrap();
    let again = request(&mut m, 500, "insta", TakePhoto, DeviceId::FrontCamera);
    assert_eq!(stage(&again), MediationStage::AwareBlocked);
    assert_eq!(m.session(sid).unwrap().state, SessionState::Terminated { reason: TerminationReason::AppReleased, ended_t: 350 });
}

#[test]
fn approval_expires_after_grace() {
    let mut m = world();
    press(&mut m, 100, "photo");
    gesture(&mut m, 200, GestureKind::PointerUp);
    let grace = MonitorConfig::default().gesture.grace_ms;
    let late = request(&mut m, 200 + grace, "insta", TakePhoto, DeviceId::FrontCamera);
    assert_eq!(stage(&late), MediationStage::AwareBlocked);
    // Nothing was waiting on the binding, so no denial is logged.
    assert_eq!(m.log().count(LogCategory::Denied), 0);
}

#[test]
fn wrong_service_is_fatal() {
    let mut m = world();
    press(&mut m, 100, "photo");
    gesture(&mut m, 200, GestureKind::PointerUp);
    let spec = RequestSpec {
        service: Some(SystemServiceId::AudioService),
        ..RequestSpec::direct("insta", TakePhoto, DeviceId::FrontCamera)
    };
    assert!(matches!(m.intercept_request(spec), Err(MonitorError::ServiceMismatch { .. })));
}

#[test]
fn invalid_device_for_operation_is_rejected() {
    let mut m = world();
    assert!(matches!(
        m.intercept_request(RequestSpec::direct("insta", TakePhoto, DeviceId::Microphone)),
        Err(MonitorError::InvalidDevice { .. })
    ));
}

#[test]
fn busy_device_is_a_conventional_denial() {
    let mut m = world();
    let sid = photo_session(&mut m, 100);
    m.install_app(app("other", "Other", &ALL, vec![button("p", TakePhoto, DeviceId::FrontCamera, ConfirmMode::ReleaseToConfirm)]))
        .unwrap();
    let r = request(&mut m, 600, "other", TakePhoto, DeviceId::FrontCamera);
    assert_eq!(r.outcome().unwrap().detail, OutcomeDetail::DeviceBusy { device: DeviceId::FrontCamera, holder: sid });
}

#[test]
fn parked_request_loses_a_device_taken_meanwhile() {
    let mut m = world();
    press(&mut m, 100, "photo");
    let parked = request(&mut m, 150, "insta", TakePhoto, DeviceId::FrontCamera);
    assert!(matches!(parked, Mediation::Deferred { .. }));
    m.set_gesture_mode(&"rat".into(), GestureMode::Exempt(ExemptReason::RemoteController)).unwrap();
    let holder = session_of(&request(&mut m, 200, "rat", TakePhoto, DeviceId::FrontCamera));
    m.advance_timers(300);
    let out = m.on_gesture(GestureEvent { kind: GestureKind::PointerUp, t: 300 });
    assert_eq!(out[0].stage, MediationStage::ConventionalDenied);
    assert_eq!(out[0].detail, OutcomeDetail::DeviceBusy { device: DeviceId::FrontCamera, holder });
    // The user did not refuse anything, so nothing is logged as Denied.
    assert_eq!(m.log().count(LogCategory::Denied), 0);
    let b = m.gestures().bindings().find(|b| !b.system).unwrap();
    assert_eq!((b.phase, b.abort_reason), (Phase::Aborted, Some(aware_core::gesture::AbortReason::DeviceBusy)));
}

#[test]
fn two_cameras_may_run_at_once() {
    let mut m = world();
    m.install_app(app("cam2", "Cam2", &ALL, vec![button("p", TakePhoto, DeviceId::BackCamera, ConfirmMode::ReleaseToConfirm)]))
        .unwrap();
    photo_session(&mut m, 100);
    m.set_foreground(&"cam2".into()).unwrap();
    press(&mut m, 1_000, "p");
    gesture(&mut m, 1_100, GestureKind::PointerUp);
    let r = request(&mut m, 1_150, "cam2", TakePhoto, DeviceId::BackCamera);
    assert_eq!(stage(&r), MediationStage::Granted);
    assert_eq!(m.active_sessions().count(), 2);
}

#[test]
fn hook_stream_taps_input_acquire_release_and_reads() {
    let m = Monitor::new(MonitorConfig::default());
    assert!(m.hooks().is_empty());

    let mut m = world();
    let sid = photo_session(&mut m, 100);
    m.tick(400);
    m.app_release(&"insta".into(), DeviceId::FrontCamera).unwrap();
    let kinds: Vec<&HookKind> = m.hooks().iter().map(|h| &h.kind).collect();
    assert!(matches!(kinds[0], HookKind::InputEvent(GestureKind::PointerDown { .. })));
    assert!(matches!(kinds[1], HookKind::InputEvent(GestureKind::PointerUp)));
    assert!(matches!(kinds[2], HookKind::RequestArrived { .. }));
    assert_eq!(kinds[3], &HookKind::DeviceAcquired { device: DeviceId::FrontCamera, session: sid });
    assert_eq!(kinds[4], &HookKind::SensorRead { device: DeviceId::FrontCamera, session: sid });
    assert_eq!(kinds[5], &HookKind::DeviceReleased { device: DeviceId::FrontCamera, session: sid });
    assert_eq!(kinds.len(), 6);
}

#[test]
fn ongoing_check_keeps_visible_sessions() {
    let mut m = world();
    let sid = photo_session(&mut m, 100);
    for t in (400..3_000).step_by(100) {
        m.tick(t);
    }
    assert!(m.session(sid).unwrap().is_active());
}

#[test]
fn suppressed_display_terminates_on_next_tick() {
    let mut m = world();
    let sid = photo_session(&mut m, 100);
    m.inject_fault(FaultKind::SuppressDisplay);
    m.tick(400);
    assert_eq!(
        m.session(sid).unwrap().state,
        SessionState::Terminated { reason: TerminationReason::OngoingViolation, ended_t: 400 }
    );
    assert!(m.devices().holder(DeviceId::FrontCamera).is_none());
    assert_eq!(m.sounds().len(), 1);
}

#[test]
fn missing_authorized_record_terminates_on_next_tick() {
    let mut m = world();
    m.inject_fault(FaultKind::SkipLog);
    let sid = photo_session(&mut m, 100);
    assert!(!m.log().has_authorized(sid));
    m.tick(400);
    assert!(!m.session(sid).unwrap().is_active());
}

#[test]
fn forged_bar_write_is_rejected_and_recorded() {
    let mut m = world();
    let sid = photo_session(&mut m, 100);
    let before = m.display().snapshot();
    m.inject_fault(FaultKind::ForgeStatusBarWrite { app_id: "rat".into(), text: "Nothing running".into() });
    assert_eq!(m.display().snapshot(), before);
    assert_eq!(m.rejected_writes().len(), 1);
    m.tick(400);
    assert!(m.session(sid).unwrap().is_active());
}

#[test]
fn concurrent_sessions_alternate_and_stay_active() {
    let mut m = world();
    m.install_app(app("rec", "Recorder", &ALL, vec![button("mic", RecordAudio, DeviceId::Microphone, ConfirmMode::ReleaseToConfirm)]))
        .unwrap();
    let a = photo_session(&mut m, 100);
    m.set_foreground(&"rec".into()).unwrap();
    press(&mut m, 400, "mic");
    gesture(&mut m, 500, GestureKind::PointerUp);
    let b = session_of(&request(&mut m, 500, "rec", RecordAudio, DeviceId::Microphone));
    let alt = MonitorConfig::default().display.alternation_ms;
    let mut shown = Vec::new();
    for t in (600..600 + 3 * alt).step_by(100) {
        m.tick(t);
        if let Some(msg) = m.display().current() {
            if shown.last() != Some(&msg.subject) {
                shown.push(msg.subject);
            }
        }
    }
    assert!(shown.len() >= 3, "rotation should switch at least twice: {shown:?}");
    assert!(m.session(a).unwrap().is_active() && m.session(b).unwrap().is_active());
}

#[test]
fn hold_to_sustain_video_ends_on_release() {
    let mut m = world();
    press(&mut m, 100, "video");
    let r = request(&mut m, 150, "insta", RecordVideo, DeviceId::BackCamera);
    let sid = session_of(&r);
    assert_eq!(m.devices().holder(DeviceId::Microphone), Some(sid));
    gesture(&mut m, 5_000, GestureKind::PointerUp);
    assert_eq!(
        m.session(sid).unwrap().state,
        SessionState::Terminated { reason: TerminationReason::UserReleased, ended_t: 5_000 }
    );
    assert!(m.devices().holder(DeviceId::Microphone).is_none());
    assert!(m.devices().holder(DeviceId::BackCamera).is_none());
    let cats: Vec<LogCategory> = m.log().entries().iter().map(|e| e.category).collect();
    assert_eq!(cats, vec![LogCategory::Authorized, LogCategory::Terminated]);
}

#[test]
fn hold_to_sustain_released_outside_is_user_abort() {
    let mut m = world();
    press(&mut m, 100, "video");
    let sid = session_of(&request(&mut m, 150, "insta", RecordVideo, DeviceId::BackCamera));
    gesture(&mut m, 1_000, GestureKind::PointerMove { inside: false });
    gesture(&mut m, 1_100, GestureKind::PointerUp);
    assert!(matches!(
        m.session(sid).unwrap().state,
        SessionState::Terminated { reason: TerminationReason::UserAborted, .. }
    ));
}

#[test]
fn parked_request_keeps_priority_after_mode_change() {
    let mut m = world();
    press(&mut m, 100, "video");
    m.set_gesture_mode(&"insta".into(), GestureMode::FingerprintConfirm).unwrap();
    let first = request(&mut m, 150, "insta", RecordVideo, DeviceId::BackCamera);
    let Mediation::Deferred { request_id, .. } = first else { panic!("waits for the scan") };
    m.set_gesture_mode(&"insta".into(), GestureMode::Standard).unwrap();
    let second = request(&mut m, 200, "insta", RecordVideo, DeviceId::BackCamera);
    assert_eq!(second.outcome().unwrap().detail, OutcomeDetail::Unsatisfied(RuleSet::of(&[RuleId::P4])));
    m.advance_timers(300);
    let out = m.on_gesture(GestureEvent { kind: GestureKind::PointerUp, t: 300 });
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].request_id, request_id);
    assert_eq!(m.outcomes().len(), 2);
}

#[test]
fn terminating_twice_fails() {
    let mut m = world();
    let sid = photo_session(&mut m, 100);
    m.terminate(sid, TerminationReason::AppReleased).unwrap();
    assert_eq!(m.terminate(sid, TerminationReason::AppReleased), Err(MonitorError::AlreadyTerminated(sid)));
    assert_eq!(m.terminate(SessionId(99), TerminationReason::AppReleased), Err(MonitorError::UnknownSession(SessionId(99))));
}

#[test]
fn releasing_a_device_not_held_fails() {
    let mut m = world();
    photo_session(&mut m, 100);
    assert!(matches!(m.app_release(&"rat".into(), DeviceId::FrontCamera), Err(MonitorError::NotHolder { .. })));
    assert!(matches!(m.app_release(&"insta".into(), DeviceId::Microphone), Err(MonitorError::NotHolder { .. })));
}

#[test]
fn termination_clears_the_bar() {
    let mut m = world();
    let sid = photo_session(&mut m, 100);
    m.terminate(sid, TerminationReason::AppReleased).unwrap();
    assert!(m.display().current().is_none());
    assert!(!m.display().shows_ongoing(sid));
}

#[test]
fn slide_out_aborts_and_logs_denied() {
    let mut m = world();
    press(&mut m, 100, "photo");
    gesture(&mut m, 200, GestureKind::PointerMove { inside: false });
    gesture(&mut m, 300, GestureKind::PointerUp);
    let b = m.gestures().bindings().next().unwrap();
    assert_eq!(b.phase, Phase::Aborted);
    assert_eq!(m.log().count(LogCategory::Denied), 1);
    assert!(m.display().current().is_none());
    let r = request(&mut m, 350, "insta", TakePhoto, DeviceId::FrontCamera);
    assert_eq!(stage(&r), MediationStage::AwareBlocked);
}

#[test]
fn slide_out_with_waiting_request_denies_it() {
    let mut m = world();
    press(&mut m, 100, "photo");
    let r = request(&mut m, 150, "insta", TakePhoto, DeviceId::FrontCamera);
    assert!(matches!(r, Mediation::Deferred { .. }));
    gesture(&mut m, 200, GestureKind::PointerMove { inside: false });
    m.advance_timers(300);
    let out = m.on_gesture(GestureEvent { kind: GestureKind::PointerUp, t: 300 });
    assert_eq!(out[0].stage, MediationStage::AwareDenied);
    assert_eq!(m.log().count(LogCategory::Denied), 1);
    assert_eq!(m.log().count(LogCategory::Blocked), 0);
    assert_eq!(m.active_sessions().count(), 0);
}

#[test]
fn held_binding_expires_exactly_at_deadline() {
    let mut m = world();
    press(&mut m, 100, "photo");
    let deadline = 100 + MonitorConfig::default().gesture.pending_timeout_ms;
    m.advance_timers(deadline - 1);
    assert_eq!(m.gestures().bindings().next().unwrap().phase, Phase::Held);
    m.advance_timers(deadline);
    let b = m.gestures().bindings().next().unwrap();
    assert_eq!((b.phase, b.resolved_t), (Phase::Expired, Some(deadline)));
    assert!(m.display().current().is_none());
}

#[test]
fn expiry_with_waiting_request_logs_denied() {
    let mut m = world();
    press(&mut m, 100, "photo");
    request(&mut m, 150, "insta", TakePhoto, DeviceId::FrontCamera);
    let out = m.advance_timers(100 + MonitorConfig::default().gesture.pending_timeout_ms);
    assert_eq!(out[0].stage, MediationStage::AwareDenied);
    assert_eq!(m.log().count(LogCategory::Denied), 1);
}

#[test]
fn stray_release_does_nothing() {
    let mut m = world();
    gesture(&mut m, 100, GestureKind::PointerUp);
    assert_eq!(m.gestures().bindings().count(), 0);
    assert!(m.log().entries().is_empty());
}

#[test]
fn fingerprint_mode_confirms_on_scan_only() {
    let mut m = world();
    m.set_gesture_mode(&"insta".into(), GestureMode::FingerprintConfirm).unwrap();
    press(&mut m, 100, "photo");
    gesture(&mut m, 200, GestureKind::PointerUp);
    assert_eq!(m.gestures().bindings().next().unwrap().phase, Phase::Held);
    gesture(&mut m, 300, GestureKind::FingerprintScan);
    let r = request(&mut m, 350, "insta", TakePhoto, DeviceId::FrontCamera);
    assert_eq!(stage(&r), MediationStage::Granted);
}

#[test]
fn chord_takes_a_system_screenshot() {
    let mut m = world();
    m.advance_timers(100);
    let out = m.on_gesture(GestureEvent { kind: GestureKind::PhysicalChord, t: 100 });
    assert_eq!(out[0].stage, MediationStage::Granted);
    let s = m.sessions().next().unwrap();
    assert_eq!((s.app_id.as_str(), s.op), (SYSTEM_APP, CaptureScreenshot));
    m.tick(300);
    assert_eq!(m.active_sessions().count(), 0);
}

#[test]
fn chord_binds_only_the_system() {
    let mut m = world();
    press(&mut m, 100, "shot");
    m.advance_timers(150);
    m.on_gesture(GestureEvent { kind: GestureKind::PhysicalChord, t: 150 });
    // The app's own binding is separate and still needs its own confirmation.
    let app_binding = m.gestures().live_binding(&"insta".into()).expect("app binding still held");
    assert_eq!(app_binding.phase, Phase::Held);
    assert_eq!(m.gestures().bindings().count(), 2);
}

#[test]
fn two_chords_two_sessions() {
    let mut m = world();
    for t in [100, 1_000] {
        m.tick(t);
        m.on_gesture(GestureEvent { kind: GestureKind::PhysicalChord, t });
    }
    m.tick(2_000);
    assert_eq!(m.sessions().count(), 2);
    assert_eq!(m.log().count(LogCategory::Authorized), 2);
    assert_eq!(m.log().count(LogCategory::Terminated), 2);
}

#[test]
fn exempt_mode_skips_gestures_but_not_messages_or_logs() {
    let mut m = world();
    m.set_gesture_mode(&"rat".into(), GestureMode::Exempt(ExemptReason::RemoteController)).unwrap();
    let r = request(&mut m, 100, "rat", TakePhoto, DeviceId::BackCamera);
    let sid = session_of(&r);
    assert!(m.display().shows_ongoing(sid));
    assert_eq!(m.display().current().unwrap().text, "Rat \u{2014} Taking photo (B)");
    assert!(m.log().has_authorized(sid));
    assert!(m.decisions()[0].exempt);
    m.app_release(&"rat".into(), DeviceId::BackCamera).unwrap();

    m.set_gesture_mode(&"rat".into(), GestureMode::Standard).unwrap();
    let r = request(&mut m, 200, "rat", TakePhoto, DeviceId::BackCamera);
    assert_eq!(r.outcome().unwrap().detail, OutcomeDetail::Unsatisfied(p1p4()));
    assert!(m.set_gesture_mode(&"ghost".into(), GestureMode::Standard).is_err());
}

#[test]
fn intents_are_charged_to_the_originating_app() {
    let mut m = world();
    m.install_app(app("camera", "Camera", &ALL, vec![])).unwrap();
    m.set_gesture_mode(&"camera".into(), GestureMode::Exempt(ExemptReason::UserWhitelisted)).unwrap();
    // A background app cannot launder its request through a whitelisted one.
    let spec = RequestSpec { origin: Origin::ViaIntent("rat".into()), ..RequestSpec::direct("camera", TakePhoto, DeviceId::FrontCamera) };
    m.advance_timers(100);
    assert_eq!(stage(&m.intercept_request(spec).unwrap()), MediationStage::AwareBlocked);

    // A user-confirmed intent from the foreground app is honoured.
    press(&mut m, 200, "photo");
    gesture(&mut m, 300, GestureKind::PointerUp);
    m.set_gesture_mode(&"camera".into(), GestureMode::Standard).unwrap();
    let spec = RequestSpec { origin: Origin::ViaIntent("insta".into()), ..RequestSpec::direct("camera", TakePhoto, DeviceId::FrontCamera) };
    let sid = session_of(&m.intercept_request(spec).unwrap());
    let s = m.session(sid).unwrap();
    assert_eq!((s.app_id.as_str(), s.charged_app.as_str()), ("camera", "insta"));
}

#[test]
fn pending_message_reactivates_hidden_bar() {
    let mut m = world();
    m.set_screen_mode(ScreenMode::Immersive);
    assert!(!m.display().visible());
    press(&mut m, 100, "photo");
    let bar = m.display().snapshot();
    assert!(bar.visible);
    assert_eq!(bar.current_message.unwrap().text, "Instagram \u{2014} Take photo (F)?");
    gesture(&mut m, 200, GestureKind::PointerMove { inside: false });
    gesture(&mut m, 300, GestureKind::PointerUp);
    assert!(!m.display().visible());
}

#[test]
fn back_to_back_blocks_queue_violations() {
    let mut m = world();
    request(&mut m, 100, "rat", TakePhoto, DeviceId::BackCamera);
    request(&mut m, 110, "rat", RecordAudio, DeviceId::Microphone);
    assert_eq!(m.sounds().len(), 2);
    assert_eq!(m.display().current().unwrap().op, TakePhoto);
    m.advance_timers(100 + MonitorConfig::default().display.violation_display_ms);
    assert_eq!(m.display().current().unwrap().op, RecordAudio);
}

#[test]
fn revoking_mid_session_terminates_and_denies_later_requests() {
    let mut m = world();
    let sid = photo_session(&mut m, 100);
    m.advance_timers(1_000);
    m.apply_retro_action(RetroAction { kind: RetroKind::RevokePermission(Permission::Camera), app_id: "insta".into(), t: 1_000 })
        .unwrap();
    assert!(matches!(
        m.session(sid).unwrap().state,
        SessionState::Terminated { reason: TerminationReason::RetroRevoked, .. }
    ));
    press(&mut m, 1_100, "photo");
    gesture(&mut m, 1_200, GestureKind::PointerUp);
    let r = request(&mut m, 1_250, "insta", TakePhoto, DeviceId::FrontCamera);
    assert_eq!(stage(&r), MediationStage::ConventionalDenied);
    assert_eq!(m.log().retro_records()[0].terminated, vec![sid]);

    m.grant_permission(&"insta".into(), Permission::Camera).unwrap();
    press(&mut m, 2_000, "photo");
    gesture(&mut m, 2_100, GestureKind::PointerUp);
    assert_eq!(stage(&request(&mut m, 2_150, "insta", TakePhoto, DeviceId::FrontCamera)), MediationStage::Granted);
}

#[test]
fn uninstall_without_sessions_only_removes() {
    let mut m = world();
    m.apply_retro_action(RetroAction { kind: RetroKind::Uninstall, app_id: "rat".into(), t: 0 }).unwrap();
    assert!(!m.registry().contains(&"rat".into()));
    assert!(m.log().entries().is_empty());
    assert_eq!(m.log().retro_records().len(), 1);
    assert!(m.apply_retro_action(RetroAction { kind: RetroKind::Uninstall, app_id: "rat".into(), t: 0 }).is_err());
}

#[test]
fn uninstall_terminates_running_sessions() {
    let mut m = world();
    let sid = photo_session(&mut m, 100);
    m.apply_retro_action(RetroAction { kind: RetroKind::Uninstall, app_id: "insta".into(), t: 500 }).unwrap();
    assert!(!m.session(sid).unwrap().is_active());
    assert!(m.devices().holder(DeviceId::FrontCamera).is_none());
}

#[test]
fn system_app_id_is_reserved() {
    let mut m = world();
    assert!(matches!(m.install_app(app(SYSTEM_APP, "Fake", &ALL, vec![])), Err(MonitorError::ReservedApp(_))));
}

#[test]
fn log_queries_by_app_and_category() {
    let mut m = world();
    photo_session(&mut m, 100);
    request(&mut m, 500, "rat", RecordAudio, DeviceId::Microphone);
    let rat = m.log().query(&LogFilter::app("rat".into()));
    assert_eq!(rat.len(), 1);
    assert!(matches!(rat[0].detail, LogDetail::Unsatisfied(_)));
    assert_eq!(m.log().query(&LogFilter::category(LogCategory::Authorized)).len(), 1);
}
