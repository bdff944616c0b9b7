use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aware::core::builtin_scenario;
use aware::core::scenarios::BUILTIN_NAMES;
use aware::report::read_report;
use aware::trace::to_jsonl;

fn aware(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aware")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rat_replay_summary() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = aware(&["run", "--builtin", "RAT_1080", "--report", path(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "blocked=1080 granted=0"), "{}", stdout(&o));
    assert_eq!(read_report(&report).unwrap().log.len(), 1080);
}

#[test]
fn missing_trace_is_usage_error() {
    let o = aware(&["run", "missing.trace"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not found"), "{}", stderr(&o));
}

#[test]
fn malformed_trace_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bad.jsonl");
    fs::write(&trace, "{\"seq\":1,\"t_ms\":0,\"kind\":\"SetScreenMode\",\"payload\":{\"mode\":\"Normal\"}}\n{\"seq\":2}\n").unwrap();
    let o = aware(&["run", path(&trace), "--report", path(&dir.path().join("r.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MalformedTrace at line 2"), "{}", stderr(&o));
}

#[test]
fn unresolvable_reference_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("ghost.jsonl");
    fs::write(&trace, "\n{\"seq\":1,\"t_ms\":0,\"kind\":\"SetForeground\",\"payload\":{\"app_id\":\"ghost\"}}\n").unwrap();
    let o = aware(&["run", path(&trace), "--report", path(&dir.path().join("r.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn trace_file_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t4.jsonl");
    fs::write(&trace, to_jsonl(&builtin_scenario("T4").unwrap().events)).unwrap();
    let (ra, rb) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let a = aware(&["run", path(&trace), "--report", path(&ra)]);
    let b = aware(&["run", "--builtin", "T4", "--report", path(&rb)]);
    assert_eq!(a.status.code(), Some(0));
    // Summaries differ only in the scenario line.
    assert_eq!(stdout(&a).lines().skip(1).collect::<Vec<_>>(), stdout(&b).lines().skip(1).collect::<Vec<_>>());
    let (mut ra, mut rb) = (read_report(&ra).unwrap(), read_report(&rb).unwrap());
    ra.mask_latencies();
    rb.mask_latencies();
    assert_eq!(ra, rb);
}

#[test]
fn missed_expectations_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // T1 holds the button for 400 ms; with a 100 ms timeout the press expires.
    let o = aware(&["run", "--builtin", "T1", "--pending-timeout-ms", "100", "--report", path(&dir.path().join("r.json"))]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("expectation failed"));
    let r = read_report(&dir.path().join("r.json")).unwrap();
    assert_eq!(r.config.gesture.pending_timeout_ms, 100);
}

#[test]
fn alternation_flag_reaches_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = aware(&["--alternation-ms", "750", "run", "--builtin", "T2", "--report", path(&report)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_report(&report).unwrap().config.display.alternation_ms, 750);
}

#[test]
fn list_prints_every_builtin() {
    let o = aware(&["list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().collect::<Vec<_>>(), BUILTIN_NAMES);
}

#[test]
fn export_log_golden() {
    let o = aware(&["export-log", "--builtin", "T1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "1|1970-01-01T00:00:01.450Z|Authorized|com.instagram|TakePhoto|BackCamera|session=s1\n\
         2|1970-01-01T00:00:02.250Z|Terminated|com.instagram|TakePhoto|BackCamera|session=s1 reason=AppReleased\n"
    );
}

#[test]
fn export_log_from_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    aware(&["run", "--builtin", "A6_hijack_audio", "--report", path(&report)]);
    let o = aware(&["export-log", path(&report)]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 1);
    let fields: Vec<&str> = lines[0].split('|').collect();
    assert_eq!(fields.len(), 7);
    assert_eq!(&fields[2..6], ["Denied", "com.simplefilters", "RecordAudio", "Microphone"]);
}

#[test]
fn bench_prints_one_row_per_path() {
    let o = aware(&["bench", "--n", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for p in ["TakePhoto/FrontCamera", "TakePhoto/BackCamera", "RecordAudio/Microphone", "CaptureScreenshot/ScreenBuffer"] {
        assert!(out.contains(p), "{out}");
    }
    assert_eq!(aware(&["bench", "--n", "0"]).status.code(), Some(2));
}

#[test]
fn bad_usage_exits_two() {
    assert_eq!(aware(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(aware(&["run"]).status.code(), Some(2));
    assert_eq!(aware(&["run", "x.jsonl", "--builtin", "T1"]).status.code(), Some(2));
    assert_eq!(aware(&["run", "--builtin", "T99"]).status.code(), Some(2));
    assert_eq!(aware(&["--help"]).status.code(), Some(0));
}
