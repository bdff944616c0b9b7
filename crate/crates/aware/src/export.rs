//! Access log export: `seq|iso-time|category|app_id|op|device|detail`.
//!
//! Virtual milliseconds are rendered as UTC instants counted from the Unix
//! epoch, so exports are stable across hosts. `|`, `\` and newlines inside
//! fields are backslash-escaped.

use aware_core::log::{DenyReason, LogDetail, LogEntry};
use aware_core::Millis;
use chrono::{DateTime, SecondsFormat};

pub fn iso_time(t: Millis) -> String {
    i64::try_from(t)
        .ok()
        .and_then(DateTime::from_timestamp_millis)
        .map_or_else(|| format!("+{t}ms"), |d| d.to_rfc3339_opts(SecondsFormat::Millis, true))
}

fn escape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '|' => out.push_str("\\|"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

pub fn detail(d: &LogDetail) -> String {
    match d {
        LogDetail::Unsatisfied(rules) => format!("unsatisfied={rules}"),
        LogDetail::Denied(DenyReason::Aborted(why)) => format!("aborted={why:?}"),
        LogDetail::Denied(DenyReason::Expired) => "expired".to_owned(),
        LogDetail::Session(s) => format!("session={s}"),
        LogDetail::Terminated { session, reason } => format!("session={session} reason={reason:?}"),
    }
}

pub fn line(e: &LogEntry) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}|{}",
        e.seq,
        iso_time(e.t),
        e.category.as_str(),
        escape(e.app_id.as_str()),
        e.op.as_str(),
        e.device.as_str(),
        escape(&detail(&e.detail))
    )
}

pub fn export(entries: &[LogEntry]) -> String {
    entries.iter().map(|e| line(e) + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use aware_core::device::{DeviceId, OperationKind};
    use aware_core::log::{LogCategory, TerminationReason};
    use aware_core::rules::{RuleId, RuleSet};
    use aware_core::SessionId;

    fn entry(detail: LogDetail) -> LogEntry {
        LogEntry {
            seq: 3,
            category: LogCategory::Blocked,
            app_id: "com.evil|rat".into(),
            op: OperationKind::TakePhoto,
            device: DeviceId::BackCamera,
            t: 61_250,
            detail,
        }
    }

    #[test]
    fn epoch_based_times() {
        assert_eq!(iso_time(0), "1970-01-01T00:00:00.000Z");
        assert_eq!(iso_time(86_400_000 + 1_500), "1970-01-02T00:00:01.500Z");
    }

    #[test]
    fn golden_line() {
        let e = entry(LogDetail::Unsatisfied(RuleSet::of(&[RuleId::P1, RuleId::P4])));
        assert_eq!(
            line(&e),
            "3|1970-01-01T00:01:01.250Z|Blocked|com.evil\\|rat|TakePhoto|BackCamera|unsatisfied={P1,P4}"
        );
        assert_eq!(line(&e).split('|').count(), 8, "escaped pipe is the only extra split");
    }

    #[test]
    fn terminated_detail() {
        let d = LogDetail::Terminated { session: SessionId(4), reason: TerminationReason::UserReleased };
        assert_eq!(detail(&d), "session=s4 reason=UserReleased");
    }
}
