//! Security-property checker over a finished [`SimulationReport`].
//!
//! Every check reads only the report, so it can be pointed at reports produced
//! elsewhere (e.g. loaded from disk) as well as at fresh runs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::device::DeviceId;
use crate::display::{message_text, MessageKind, MessageSubject, SecurityMessage};
use crate::engine::{Verdict, SYSTEM_APP, SYSTEM_DISPLAY_NAME};
use crate::gesture::{AbortReason, GestureKind, Phase, CHORD_BUTTON};
use crate::hooks::{HookKind, MediationStage};
use crate::ids::{AppId, BindingId, RequestId, SessionId};
use crate::log::{DenyReason, LogCategory, LogDetail};
use crate::sim::SimulationReport;
use crate::Millis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Property {
    /// Device data reaches only active, authorized sessions.
    SP1,
    /// Every grant matches the user's confirmed gesture triple.
    SP2,
    /// While a session runs the bar shows one of the running sessions.
    SP3,
    /// Every grant is logged as authorized and every session's end as terminated.
    SP4,
    /// Every running session is shown within each rotation window.
    SP5,
    /// Bar text is the monitor's template for a real binding, session or block.
    TrustedPath,
    /// Nothing but the monitor attempted to write the bar.
    StatusBarExclusive,
    /// One outcome per request; only engine-decided requests are granted.
    CompleteMediation,
    /// Blocked and Denied log counts match the engine's decisions and bindings.
    Conservation,
    /// Bindings end exactly once and only confirmed ones authorize.
    BindingSoundness,
}

impl Property {
    pub const ALL: [Property; 10] = [
        Property::SP1,
        Property::SP2,
        Property::SP3,
        Property::SP4,
        Property::SP5,
        Property::TrustedPath,
        Property::StatusBarExclusive,
        Property::CompleteMediation,
        Property::Conservation,
        Property::BindingSoundness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Property::SP1 => "SP1",
            Property::SP2 => "SP2",
            Property::SP3 => "SP3",
            Property::SP4 => "SP4",
            Property::SP5 => "SP5",
            Property::TrustedPath => "TrustedPath",
            Property::StatusBarExclusive => "StatusBarExclusive",
            Property::CompleteMediation => "CompleteMediation",
            Property::Conservation => "Conservation",
            Property::BindingSoundness => "BindingSoundness",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub property: Property,
    pub t: Option<Millis>,
    pub detail: String,
}

pub fn check(r: &SimulationReport, p: Property) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut v = |t: Option<Millis>, detail: String| out.push(Violation { property: p, t, detail });
    match p {
        Property::SP1 => sp1(r, &mut v),
        Property::SP2 => sp2(r, &mut v),
        Property::SP3 => sp3(r, &mut v),
        Property::SP4 => sp4(r, &mut v),
        Property::SP5 => sp5(r, &mut v),
        Property::TrustedPath => trusted_path(r, &mut v),
        Property::StatusBarExclusive => {
            for w in &r.rejected_writes {
                v(Some(w.t), format!("{} attempted to write {:?}", w.writer, w.text));
            }
        }
        Property::CompleteMediation => complete_mediation(r, &mut v),
        Property::Conservation => conservation(r, &mut v),
        Property::BindingSoundness => binding_soundness(r, &mut v),
    }
    out
}

pub fn check_all(r: &SimulationReport) -> Vec<Violation> {
    Property::ALL.iter().flat_map(|p| check(r, *p)).collect()
}

/// Properties with at least one violation.
pub fn falsified(r: &SimulationReport) -> BTreeSet<Property> {
    check_all(r).into_iter().map(|v| v.property).collect()
}

type Sink<'a> = dyn FnMut(Option<Millis>, String) + 'a;

fn sp1(r: &SimulationReport, v: &mut Sink) {
    let allowed: BTreeSet<SessionId> = r
        .decisions
        .iter()
        .filter_map(|d| match d.verdict {
            Verdict::Allow(s) => Some(s),
            Verdict::Block(_) => None,
        })
        .collect();
    let sessions: BTreeMap<SessionId, _> = r.sessions.iter().map(|s| (s.session_id, s)).collect();
    let mut holders: BTreeMap<DeviceId, SessionId> = BTreeMap::new();
    for h in &r.hooks {
        match &h.kind {
            HookKind::DeviceAcquired { device, session } => {
                holders.insert(*device, *session);
            }
            HookKind::DeviceReleased { device, .. } => {
                holders.remove(device);
            }
            HookKind::SensorRead { device, session } => {
                if holders.get(device) != Some(session) {
                    v(Some(h.t), format!("{device} data delivered to {session}, which does not hold it"));
                }
                if !allowed.contains(session) {
                    v(Some(h.t), format!("{device} data delivered to {session} without an Allow decision"));
                }
                match sessions.get(session) {
                    Some(s) if s.started_t <= h.t && s.ended_t().is_none_or(|e| h.t <= e) => {}
                    _ => v(Some(h.t), format!("{device} data delivered outside the lifetime of {session}")),
                }
            }
            _ => {}
        }
    }
}

fn sp2(r: &SimulationReport, v: &mut Sink) {
    let bindings: BTreeMap<BindingId, _> = r.bindings.iter().map(|b| (b.binding_id, b)).collect();
    let sessions: BTreeMap<SessionId, _> = r.sessions.iter().map(|s| (s.session_id, s)).collect();
    for d in &r.decisions {
        let Verdict::Allow(sid) = d.verdict else { continue };
        if !d.rules.all_satisfied() {
            v(Some(d.t), format!("{} allowed with unsatisfied {}", d.request_id, d.rules.unsatisfied()));
        }
        let Some(s) = sessions.get(&sid) else {
            v(Some(d.t), format!("{} allowed {sid}, which does not exist", d.request_id));
            continue;
        };
        if d.app_id != s.app_id || d.op != s.op || d.device != s.device {
            v(Some(d.t), format!("{} decided ({}, {}, {}) but {sid} is ({}, {}, {})", d.request_id, d.app_id, d.op, d.device, s.app_id, s.op, s.device));
        }
        match d.binding.and_then(|b| bindings.get(&b)) {
            Some(b) => {
                if b.app_id != s.charged_app || b.op != s.op || b.device != s.device {
                    v(
                        Some(d.t),
                        format!(
                            "{sid} is ({}, {}, {}) but the gesture bound ({}, {}, {})",
                            s.charged_app, s.op, s.device, b.app_id, b.op, b.device
                        ),
                    );
                }
                if b.phase != Phase::Confirmed || b.session != Some(sid) {
                    v(Some(d.t), format!("{sid} granted on binding {} in phase {:?}", b.binding_id, b.phase));
                }
            }
            None if d.exempt && d.binding.is_none() => {}
            None => v(Some(d.t), format!("{sid} granted without a gesture binding")),
        }
    }
}

/// Time intervals covered by each timeline entry: `[t_i, t_{i+1})`, the last
/// one ending at the report's end time.
fn intervals(r: &SimulationReport) -> impl Iterator<Item = (usize, Millis, Millis)> + '_ {
    let end = r.summary.end_t;
    r.timeline.iter().enumerate().map(move |(i, e)| {
        let to = r.timeline.get(i + 1).map_or(end.max(e.t), |n| n.t);
        (i, e.t, to)
    })
}

fn sp3(r: &SimulationReport, v: &mut Sink) {
    for (i, from, _) in intervals(r) {
        let e = &r.timeline[i];
        let cur = e.bar.current_message.as_ref();
        if let Some(SecurityMessage { kind: MessageKind::Ongoing, subject: MessageSubject::Session(s), .. }) = cur {
            if !e.active_sessions.contains(s) {
                v(Some(from), format!("ongoing message for {s}, which is not running"));
            }
        }
        if e.active_sessions.is_empty() {
            continue;
        }
        match cur {
            None => v(Some(from), format!("{} session(s) running with an empty status bar", e.active_sessions.len())),
            Some(_) if !e.bar.visible => v(Some(from), "status bar hidden while a session runs".into()),
            Some(_) => {}
        }
    }
}

fn sp5(r: &SimulationReport, v: &mut Sink) {
    let alt = r.config.display.alternation_ms;
    let shown_ongoing = |i: usize| {
        let e = &r.timeline[i];
        match e.bar.current_message.as_ref() {
            Some(SecurityMessage { kind: MessageKind::Ongoing, subject: MessageSubject::Session(s), .. }) if e.bar.visible => Some(*s),
            _ => None,
        }
    };
    let spans: Vec<(usize, Millis, Millis)> = intervals(r).collect();
    let mut i = 0;
    while i < spans.len() {
        let active = &r.timeline[spans[i].0].active_sessions;
        if active.is_empty() || shown_ongoing(i).is_none() {
            i += 1;
            continue;
        }
        // Maximal run with the same running set and the rotation on screen.
        let mut j = i;
        while j + 1 < spans.len() && &r.timeline[j + 1].active_sessions == active && shown_ongoing(j + 1).is_some() {
            j += 1;
        }
        let (start, end) = (spans[i].1, spans[j].2);
        let window = active.len() as Millis * alt;
        for s in active {
            let mut last_seen_end = start;
            let mut gap_check = |gap_from: Millis, gap_to: Millis| {
                if gap_to > gap_from && gap_to - gap_from >= window {
                    v(Some(gap_from), format!("{s} not shown for {} ms (window {window} ms)", gap_to - gap_from));
                }
            };
            for (k, from, to) in spans.iter().take(j + 1).skip(i) {
                if shown_ongoing(*k) == Some(*s) {
                    gap_check(last_seen_end, *from);
                    last_seen_end = *to;
                }
            }
            gap_check(last_seen_end, end);
        }
        i = j + 1;
    }
}

fn sp4(r: &SimulationReport, v: &mut Sink) {
    let allows: Vec<SessionId> = r
        .decisions
        .iter()
        .filter_map(|d| match d.verdict {
            Verdict::Allow(s) => Some(s),
            Verdict::Block(_) => None,
        })
        .collect();
    let mut authorized: BTreeMap<SessionId, u64> = BTreeMap::new();
    let mut terminated: BTreeMap<SessionId, Vec<u64>> = BTreeMap::new();
    for e in &r.log {
        match (&e.category, &e.detail) {
            (LogCategory::Authorized, LogDetail::Session(s)) => {
                if authorized.insert(*s, e.seq).is_some() {
                    v(Some(e.t), format!("{s} authorized twice"));
                }
            }
            (LogCategory::Terminated, LogDetail::Terminated { session, .. }) => {
                terminated.entry(*session).or_default().push(e.seq);
                match authorized.get(session) {
                    Some(a) if *a < e.seq => {}
                    _ => v(Some(e.t), format!("termination of {session} has no earlier Authorized entry")),
                }
            }
            (LogCategory::Authorized | LogCategory::Terminated, _) => {
                v(Some(e.t), format!("log entry {} has a mismatched detail", e.seq));
            }
            _ => {}
        }
    }
    if authorized.len() != allows.len() {
        v(None, format!("{} Allow decisions but {} Authorized entries", allows.len(), authorized.len()));
    }
    for s in &allows {
        if !authorized.contains_key(s) {
            v(None, format!("{s} was allowed but never logged as authorized"));
        }
    }
    for s in &r.sessions {
        let n = terminated.get(&s.session_id).map_or(0, |t| t.len());
        if n != 1 {
            v(s.ended_t(), format!("{} has {n} termination records", s.session_id));
        }
    }
}

fn display_names(r: &SimulationReport) -> BTreeMap<AppId, String> {
    let mut names: BTreeMap<AppId, String> = r.apps.iter().map(|a| (a.app_id.clone(), a.display_name.clone())).collect();
    names.insert(AppId::new(SYSTEM_APP), SYSTEM_DISPLAY_NAME.into());
    names
}

fn trusted_path(r: &SimulationReport, v: &mut Sink) {
    let names = display_names(r);
    let bindings: BTreeMap<BindingId, _> = r.bindings.iter().map(|b| (b.binding_id, b)).collect();
    let sessions: BTreeMap<SessionId, _> = r.sessions.iter().map(|s| (s.session_id, s)).collect();
    let forged: BTreeSet<&str> = r.rejected_writes.iter().map(|w| w.text.as_str()).collect();
    for e in &r.timeline {
        for m in e.bar.current_message.iter().chain(e.bar.rotation.iter()) {
            let Some(name) = names.get(&m.app_id) else {
                v(Some(e.t), format!("message for unknown app {}", m.app_id));
                continue;
            };
            if m.text != message_text(m.kind, name, m.op, m.device) || &m.app_display_name != name {
                v(Some(e.t), format!("bar text {:?} is not the monitor's template", m.text));
            }
            if forged.contains(m.text.as_str()) {
                v(Some(e.t), format!("forged text {:?} reached the bar", m.text));
            }
            let subject_ok = match (m.kind, m.subject) {
                (MessageKind::Pending, MessageSubject::Binding(b)) => bindings
                    .get(&b)
                    .is_some_and(|b| b.app_id == m.app_id && b.op == m.op && b.device == m.device),
                (MessageKind::Ongoing, MessageSubject::Session(s)) => sessions
                    .get(&s)
                    .is_some_and(|s| s.app_id == m.app_id && s.op == m.op && s.device == m.device),
                (MessageKind::Violation, MessageSubject::Violation(_)) => true,
                _ => false,
            };
            if !subject_ok {
                v(Some(e.t), format!("message {:?} does not describe its subject", m.text));
            }
        }
    }
}

fn complete_mediation(r: &SimulationReport, v: &mut Sink) {
    let arrived: BTreeSet<RequestId> = r
        .hooks
        .iter()
        .filter_map(|h| match h.kind {
            HookKind::RequestArrived { request_id, .. } => Some(request_id),
            _ => None,
        })
        .collect();
    let decided: BTreeSet<RequestId> = r.decisions.iter().map(|d| d.request_id).collect();
    let mut seen = BTreeSet::new();
    for o in &r.outcomes {
        if !seen.insert(o.request_id) {
            v(Some(o.t), format!("{} has more than one outcome", o.request_id));
        }
        if !arrived.contains(&o.request_id) {
            v(Some(o.t), format!("{} has an outcome but never arrived", o.request_id));
        }
        let is_decided = decided.contains(&o.request_id);
        match o.stage {
            MediationStage::ConventionalDenied if is_decided => {
                v(Some(o.t), format!("{} was conventionally denied yet reached the engine", o.request_id))
            }
            MediationStage::Granted | MediationStage::AwareBlocked | MediationStage::AwareDenied if !is_decided => {
                v(Some(o.t), format!("{} has stage {:?} without an engine decision", o.request_id, o.stage))
            }
            _ => {}
        }
    }
    for id in &arrived {
        if !seen.contains(id) {
            v(None, format!("{id} arrived but has no outcome"));
        }
    }
    let conventional = r.stage_count(MediationStage::ConventionalDenied);
    if decided.len() + conventional != arrived.len() {
        v(
            None,
            format!("{} decisions + {conventional} conventional denials != {} requests", decided.len(), arrived.len()),
        );
    }
}

fn conservation(r: &SimulationReport, v: &mut Sink) {
    let blocked = r.log_count(LogCategory::Blocked);
    let aware_blocked = r.stage_count(MediationStage::AwareBlocked);
    if blocked != aware_blocked {
        v(None, format!("{blocked} Blocked entries but {aware_blocked} blocked requests"));
    }
    let expected_denied = r
        .bindings
        .iter()
        .filter(|b| {
            matches!(b.phase, Phase::Aborted | Phase::Expired)
                && b.abort_reason != Some(AbortReason::DeviceBusy)
                && (b.attached.is_some() || b.abort_reason == Some(AbortReason::SlideOut))
        })
        .count();
    // A parked request whose device was taken meanwhile is refused by the platform, not the user.
    for b in r.bindings.iter().filter(|b| b.abort_reason == Some(AbortReason::DeviceBusy)) {
        let Some(req) = b.attached else { continue };
        let stage = r.outcomes.iter().find(|o| o.request_id == req).map(|o| o.stage);
        if stage != Some(MediationStage::ConventionalDenied) {
            v(b.resolved_t, format!("{req} on busy device ended as {stage:?}"));
        }
    }
    let denied = r.log_count(LogCategory::Denied);
    if denied != expected_denied {
        v(None, format!("{denied} Denied entries but {expected_denied} refused bindings"));
    }
    for e in r.log.iter().filter(|e| e.category == LogCategory::Denied) {
        if !matches!(e.detail, LogDetail::Denied(DenyReason::Aborted(_) | DenyReason::Expired)) {
            v(Some(e.t), format!("Denied entry {} has detail {:?}", e.seq, e.detail));
        }
    }
    for (i, e) in r.log.iter().enumerate() {
        if e.seq != i as u64 + 1 {
            v(Some(e.t), format!("log seq {} at position {}", e.seq, i + 1));
        }
    }
}

fn binding_soundness(r: &SimulationReport, v: &mut Sink) {
    let mut presses: Vec<(Millis, &str)> = Vec::new();
    for h in &r.hooks {
        if let HookKind::InputEvent(GestureKind::PointerDown { button: Some(b) }) = &h.kind {
            presses.push((h.t, b.as_str()));
        }
    }
    let chords: Vec<Millis> = r
        .hooks
        .iter()
        .filter(|h| matches!(h.kind, HookKind::InputEvent(GestureKind::PhysicalChord)))
        .map(|h| h.t)
        .collect();
    let allowed_bindings: BTreeSet<BindingId> = r
        .decisions
        .iter()
        .filter(|d| matches!(d.verdict, Verdict::Allow(_)))
        .filter_map(|d| d.binding)
        .collect();
    for b in &r.bindings {
        if !b.phase.is_terminal() {
            v(Some(b.created_t), format!("binding {} never resolved ({:?})", b.binding_id, b.phase));
        }
        if b.resolved_t.is_none_or(|t| t < b.created_t) {
            v(Some(b.created_t), format!("binding {} has resolution time {:?}", b.binding_id, b.resolved_t));
        }
        let pressed = if b.system {
            b.button_id == CHORD_BUTTON && chords.contains(&b.created_t)
        } else {
            presses.iter().any(|(t, id)| *t == b.created_t && *id == b.button_id)
        };
        if !pressed {
            v(Some(b.created_t), format!("binding {} has no press of {}", b.binding_id, b.button_id));
        }
        let authorized = allowed_bindings.contains(&b.binding_id);
        if authorized != (b.phase == Phase::Confirmed) {
            v(
                Some(b.created_t),
                format!("binding {} in phase {:?} authorized={authorized}", b.binding_id, b.phase),
            );
        }
        if b.resolved_t.is_some_and(|t| t > b.deadline_t && b.phase == Phase::Expired && b.confirmed_t.is_none()) {
            v(b.resolved_t, format!("binding {} expired after its deadline", b.binding_id));
        }
    }
}
