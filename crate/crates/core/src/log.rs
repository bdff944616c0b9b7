//! Append-only access log and retrospective actions.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::device::{DeviceId, OperationKind, Permission};
use crate::gesture::AbortReason;
use crate::ids::{AppId, SessionId};
use crate::rules::RuleSet;
use crate::Millis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LogCategory {
    Blocked,
    Denied,
    Authorized,
    Terminated,
}

impl LogCategory {
    pub const ALL: [LogCategory; 4] = [
        LogCategory::Blocked,
        LogCategory::Denied,
        LogCategory::Authorized,
        LogCategory::Terminated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LogCategory::Blocked => "Blocked",
            LogCategory::Denied => "Denied",
            LogCategory::Authorized => "Authorized",
            LogCategory::Terminated => "Terminated",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DenyReason {
    Aborted(AbortReason),
    Expired,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationReason {
    UserReleased,
    UserAborted,
    AppReleased,
    OngoingViolation,
    RetroRevoked,
    SimulationEnd,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogDetail {
    Unsatisfied(RuleSet),
    Denied(DenyReason),
    Session(SessionId),
    Terminated { session: SessionId, reason: TerminationReason },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub category: LogCategory,
    pub app_id: AppId,
    pub op: OperationKind,
    pub device: DeviceId,
    pub t: Millis,
    pub detail: LogDetail,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RetroKind {
    Uninstall,
    RevokePermission(Permission),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetroAction {
    pub kind: RetroKind,
    pub app_id: AppId,
    pub t: Millis,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetroRecord {
    pub action: RetroAction,
    pub terminated: Vec<SessionId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LogFilter {
    pub app: Option<AppId>,
    pub category: Option<LogCategory>,
    /// Inclusive lower bound.
    pub from_t: Option<Millis>,
    /// Exclusive upper bound.
    pub to_t: Option<Millis>,
}

impl LogFilter {
    pub fn app(app: AppId) -> Self {
        Self { app: Some(app), ..Self::default() }
    }

    pub fn category(category: LogCategory) -> Self {
        Self { category: Some(category), ..Self::default() }
    }

    pub fn matches(&self, e: &LogEntry) -> bool {
        self.app.as_ref().is_none_or(|a| a == &e.app_id)
            && self.category.is_none_or(|c| c == e.category)
            && self.from_t.is_none_or(|f| e.t >= f)
            && self.to_t.is_none_or(|to| e.t < to)
    }
}

#[derive(Clone, Debug, Default)]
pub struct AccessLog {
    entries: Vec<LogEntry>,
    retro: Vec<RetroRecord>,
    authorized: BTreeSet<SessionId>,
    skip_next_authorized: bool,
}

impl AccessLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry, assigning the next sequence number. Returns `None`
    /// only when a `SkipLog` fault swallowed the write.
    pub fn append(
        &mut self,
        category: LogCategory,
        app_id: AppId,
        op: OperationKind,
        device: DeviceId,
        t: Millis,
        detail: LogDetail,
    ) -> Option<u64> {
        if category == LogCategory::Authorized && self.skip_next_authorized {
            self.skip_next_authorized = false;
            return None;
        }
        let seq = self.entries.len() as u64 + 1;
        if let (LogCategory::Authorized, LogDetail::Session(s)) = (category, &detail) {
            self.authorized.insert(*s);
        }
        self.entries.push(LogEntry { seq, category, app_id, op, device, t, detail });
        Some(seq)
    }

    /// Fault injection: the next `Authorized` write is dropped.
    pub fn skip_next_authorized(&mut self) {
        self.skip_next_authorized = true;
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn query(&self, filter: &LogFilter) -> Vec<&LogEntry> {
        self.entries.iter().filter(|e| filter.matches(e)).collect()
    }

    pub fn count(&self, category: LogCategory) -> usize {
        self.entries.iter().filter(|e| e.category == category).count()
    }

    pub fn has_authorized(&self, session: SessionId) -> bool {
        self.authorized.contains(&session)
    }

    pub fn record_retro(&mut self, record: RetroRecord) {
        self.retro.push(record);
    }

    pub fn retro_records(&self) -> &[RetroRecord] {
        &self.retro
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleId;

    fn fill(log: &mut AccessLog) {
        let apps = ["a", "b"];
        for i in 0..20u64 {
            let cat = LogCategory::ALL[(i % 4) as usize];
            let detail = match cat {
                LogCategory::Blocked => LogDetail::Unsatisfied(RuleSet::of(&[RuleId::P1, RuleId::P4])),
                LogCategory::Denied => LogDetail::Denied(DenyReason::Expired),
                LogCategory::Authorized => LogDetail::Session(SessionId(i)),
                LogCategory::Terminated => LogDetail::Terminated {
                    session: SessionId(i - 1),
                    reason: TerminationReason::AppReleased,
                },
            };
            log.append(
                cat,
                AppId::new(apps[(i % 2) as usize]),
                OperationKind::TakePhoto,
                DeviceId::BackCamera,
                i * 100,
                detail,
            );
        }
    }

    #[test]
    fn seq_is_gapless() {
        let mut log = AccessLog::new();
        fill(&mut log);
        for (i, e) in log.entries().iter().enumerate() {
            assert_eq!(e.seq, i as u64 + 1);
        }
    }

    #[test]
    fn empty_log_queries_are_empty() {
        let log = AccessLog::new();
        assert!(log.query(&LogFilter::default()).is_empty());
        assert!(log.query(&LogFilter::category(LogCategory::Blocked)).is_empty());
    }

    #[test]
    fn app_query_is_union_of_category_queries() {
        let mut log = AccessLog::new();
        fill(&mut log);
        for app in ["a", "b"] {
            let by_app: Vec<u64> = log.query(&LogFilter::app(AppId::new(app))).iter().map(|e| e.seq).collect();
            let mut union: Vec<u64> = LogCategory::ALL
                .iter()
                .flat_map(|c| {
                    log.query(&LogFilter {
                        app: Some(AppId::new(app)),
                        category: Some(*c),
                        ..LogFilter::default()
                    })
                })
                .map(|e| e.seq)
                .collect();
            union.sort_unstable();
            assert_eq!(by_app, union);
        }
    }

    #[test]
    fn time_range_is_half_open() {
        let mut log = AccessLog::new();
        fill(&mut log);
        let f = LogFilter { from_t: Some(500), to_t: Some(1_000), ..LogFilter::default() };
        let ts: Vec<Millis> = log.query(&f).iter().map(|e| e.t).collect();
        assert_eq!(ts, alloc::vec![500, 600, 700, 800, 900]);
    }

    #[test]
    fn skip_fault_drops_one_authorized_write() {
        let mut log = AccessLog::new();
        log.skip_next_authorized();
        let a = AppId::new("a");
        assert_eq!(
            log.append(LogCategory::Authorized, a.clone(), OperationKind::TakePhoto, DeviceId::BackCamera, 0, LogDetail::Session(SessionId(1))),
            None
        );
        assert_eq!(
            log.append(LogCategory::Authorized, a, OperationKind::TakePhoto, DeviceId::BackCamera, 0, LogDetail::Session(SessionId(2))),
            Some(1)
        );
        assert!(!log.has_authorized(SessionId(1)));
        assert!(log.has_authorized(SessionId(2)));
    }
}
