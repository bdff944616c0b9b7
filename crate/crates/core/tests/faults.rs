//! Every checker must catch the defect it targets, and only that one.

use std::collections::BTreeSet;

use aware_core::device::{DeviceId, SystemServiceId};
use aware_core::engine::FaultKind;
use aware_core::gesture::GestureKind;
use aware_core::hooks::{HookEvent, HookKind, RequestSpec};
use aware_core::log::LogCategory;
use aware_core::sim::{EventKind, SimConfig, SimError, SimulationReport, Simulator};
use aware_core::verify::{check, falsified, Property};
use aware_core::{builtin_scenario, ScenarioEvent};

const BENIGN: [&str; 6] = ["T1", "T2", "T3", "T4", "T5", "T10"];

/// Position of the event that starts the scenario's only session.
fn trigger(events: &[ScenarioEvent]) -> usize {
    events
        .iter()
        .position(|e| matches!(e.kind, EventKind::AppRequest(_) | EventKind::Gesture(GestureKind::PhysicalChord)))
        .expect("benign scenario has a trigger")
}

fn with_fault(name: &str, fault: FaultKind) -> Vec<ScenarioEvent> {
    let mut events = builtin_scenario(name).unwrap().events;
    let i = trigger(&events);
    let t = events[i].t_ms;
    // A skipped log record has to be armed before the grant; the others act on a running session.
    let at = if fault == FaultKind::SkipLog { i } else { i + 1 };
    events.insert(at, ScenarioEvent::new(0, t, EventKind::FaultInject(fault)));
    for (k, e) in events.iter_mut().enumerate() {
        e.seq = k as u64 + 1;
    }
    events
}

fn run(events: &[ScenarioEvent]) -> SimulationReport {
    Simulator::run(SimConfig::default(), events).unwrap()
}

fn forge() -> FaultKind {
    FaultKind::ForgeStatusBarWrite { app_id: "evil".into(), text: "Nothing recording".into() }
}

#[test]
fn suppressed_display_falsifies_only_sp3() {
    for name in BENIGN {
        let r = run(&with_fault(name, FaultKind::SuppressDisplay));
        assert_eq!(falsified(&r), BTreeSet::from([Property::SP3]), "{name}");
    }
}

#[test]
fn skipped_log_falsifies_only_sp4() {
    for name in BENIGN {
        let r = run(&with_fault(name, FaultKind::SkipLog));
        assert_eq!(falsified(&r), BTreeSet::from([Property::SP4]), "{name}");
        assert_eq!(r.log_count(LogCategory::Authorized), 0, "{name}");
    }
}

#[test]
fn forged_write_falsifies_only_exclusivity() {
    for name in BENIGN {
        let r = run(&with_fault(name, forge()));
        assert_eq!(falsified(&r), BTreeSet::from([Property::StatusBarExclusive]), "{name}");
    }
}

#[test]
fn faults_never_break_the_monitor_run() {
    let r = run(&with_fault("T1", FaultKind::SuppressDisplay));
    // The monitor notices the dark bar and stops the session on its next check.
    assert_eq!(r.sessions.len(), 1);
    assert!(!r.sessions[0].is_active());
    assert_eq!(r.sounds.len(), 1);
}

#[test]
fn service_mismatch_aborts_the_run() {
    let mut events = builtin_scenario("T1").unwrap().events;
    let i = trigger(&events);
    let EventKind::AppRequest(spec) = &events[i].kind else { panic!() };
    let bad = RequestSpec { service: Some(SystemServiceId::AudioService), ..spec.clone() };
    events[i].kind = EventKind::AppRequest(bad);
    match Simulator::run(SimConfig::default(), &events) {
        Err(SimError::Fatal { line, .. }) => assert_eq!(line, i + 1),
        other => panic!("expected fatal error, got {other:?}"),
    }
}

// Tampering with a clean report must trip the matching checker.

fn clean(name: &str) -> SimulationReport {
    let r = run(&builtin_scenario(name).unwrap().events);
    assert!(falsified(&r).is_empty());
    r
}

#[test]
fn reads_after_termination_trip_sp1() {
    let mut r = clean("T1");
    let s = &r.sessions[0];
    let t = s.ended_t().unwrap() + 100;
    r.hooks.push(HookEvent { t, kind: HookKind::SensorRead { device: s.device, session: s.session_id } });
    assert!(!check(&r, Property::SP1).is_empty());
}

#[test]
fn grant_for_another_device_trips_sp2() {
    let mut r = clean("T1");
    r.decisions[0].device = DeviceId::FrontCamera;
    assert!(!check(&r, Property::SP2).is_empty());
}

#[test]
fn blank_bar_during_session_trips_sp3() {
    let mut r = clean("T4");
    let start = r.sessions[0].started_t;
    let e = r.timeline.iter_mut().find(|e| e.t >= start && !e.active_sessions.is_empty()).unwrap();
    e.bar.current_message = None;
    assert!(!check(&r, Property::SP3).is_empty());
}

#[test]
fn missing_terminated_record_trips_sp4() {
    let mut r = clean("T2");
    r.log.retain(|e| e.category != LogCategory::Terminated);
    assert!(!check(&r, Property::SP4).is_empty());
}

#[test]
fn starved_rotation_trips_sp5() {
    let mut r = clean("T2");
    // Pretend a second session ran alongside and was never shown.
    let ghost = aware_core::SessionId(999);
    let start = r.sessions[0].started_t;
    for e in r.timeline.iter_mut().filter(|e| e.t >= start && !e.active_sessions.is_empty()) {
        e.active_sessions.push(ghost);
    }
    assert!(!check(&r, Property::SP5).is_empty());
}

#[test]
fn altered_message_text_trips_trusted_path() {
    let mut r = clean("T3");
    let e = r.timeline.iter_mut().find(|e| e.bar.current_message.is_some()).unwrap();
    e.bar.current_message.as_mut().unwrap().text = "Nothing recording".into();
    assert!(!check(&r, Property::TrustedPath).is_empty());
}

#[test]
fn dropped_outcome_trips_complete_mediation() {
    let mut r = clean("A1_stealthy_photo");
    r.outcomes.clear();
    assert!(!check(&r, Property::CompleteMediation).is_empty());
}

#[test]
fn extra_blocked_record_trips_conservation() {
    let mut r = clean("A2_stealthy_audio");
    let mut extra = r.log[0].clone();
    extra.seq = r.log.len() as u64 + 1;
    r.log.push(extra);
    assert!(!check(&r, Property::Conservation).is_empty());
}

#[test]
fn unresolved_binding_trips_binding_soundness() {
    let mut r = clean("T1");
    r.bindings[0].resolved_t = None;
    assert!(!check(&r, Property::BindingSoundness).is_empty());
}
