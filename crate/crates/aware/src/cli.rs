//! `aware` command line.
//!
//! Exit codes: 0 success, 1 a run missed its expectations or broke a
//! security property, 2 bad usage or unreadable input.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;

use aware_core::bench::{bench, BenchReport, Stats};
use aware_core::scenarios::BUILTIN_NAMES;
use aware_core::sim::{SimConfig, Simulator};
use aware_core::verify::check_all;
use aware_core::{builtin_scenario, Millis};
use clap::{Args, Parser, Subcommand};

use crate::bridge::Bridge;
use crate::stopwatch::InstantStopwatch;
use crate::{export, report, trace};

#[derive(Debug, Parser)]
#[command(name = "aware", version, about = "Gesture-bound I/O access monitor simulator")]
pub struct Cli {
    #[command(flatten)]
    pub timing: Timing,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Timing {
    /// How long a held press waits for its request.
    #[arg(long, global = true)]
    pub pending_timeout_ms: Option<Millis>,
    /// Rotation period of concurrent session messages.
    #[arg(long, global = true)]
    pub alternation_ms: Option<Millis>,
}

impl Timing {
    pub fn config(&self) -> SimConfig {
        let mut c = SimConfig::default();
        if let Some(v) = self.pending_timeout_ms {
            c.gesture.pending_timeout_ms = v;
        }
        if let Some(v) = self.alternation_ms {
            c.display.alternation_ms = v;
        }
        c
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a trace file or a builtin scenario and write the report.
    Run {
        #[arg(conflicts_with = "builtin", required_unless_present = "builtin")]
        trace: Option<PathBuf>,
        #[arg(long)]
        builtin: Option<String>,
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
    },
    /// List builtin scenarios.
    List,
    /// Print the access log of a report (or builtin run) as pipe-separated lines.
    ExportLog {
        #[arg(conflicts_with = "builtin", required_unless_present = "builtin")]
        report: Option<PathBuf>,
        #[arg(long)]
        builtin: Option<String>,
    },
    /// Time mediation decisions per device path.
    Bench {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
    /// Serve the front-end bridge.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "T1")]
        scenario: String,
    },
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let _ = write!(err, "{e}");
            return 2;
        }
    };
    let config = cli.timing.config();
    match cli.command {
        Command::Run { trace, builtin, report } => cmd_run(config, trace, builtin, &report, out, err),
        Command::List => {
            for name in BUILTIN_NAMES {
                let _ = writeln!(out, "{name}");
            }
            0
        }
        Command::ExportLog { report, builtin } => cmd_export(config, report, builtin, out, err),
        Command::Bench { n } => {
            if n == 0 {
                let _ = writeln!(err, "--n must be at least 1");
                return 2;
            }
            let _ = write!(out, "{}", bench_table(&bench(n, &InstantStopwatch::new())));
            0
        }
        Command::Serve { port, host, scenario } => cmd_serve(config, &host, port, &scenario, out, err),
    }
}

fn cmd_run(
    config: SimConfig,
    trace_path: Option<PathBuf>,
    builtin: Option<String>,
    report_path: &std::path::Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let (name, events, expect) = match (&trace_path, builtin) {
        (_, Some(name)) => match builtin_scenario(&name) {
            Ok(sc) => (sc.name, sc.events, Some(sc.expect)),
            Err(e) => {
                let _ = writeln!(err, "{e}");
                return 2;
            }
        },
        (Some(path), None) => match trace::load_trace(path) {
            Ok(events) => (path.display().to_string(), events, None),
            Err(e) => {
                let _ = writeln!(err, "{e}");
                return 2;
            }
        },
        (None, None) => unreachable!("clap requires a trace or --builtin"),
    };
    let r = match Simulator::run_with(config, &events, InstantStopwatch::new()) {
        Ok(r) => r,
        Err(e) => {
            let lines: Vec<usize> = match &trace_path {
                Some(p) => std::fs::read_to_string(p)
                    .map(|t| t.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, _)| i + 1).collect())
                    .unwrap_or_default(),
                None => Vec::new(),
            };
            let _ = writeln!(err, "{}", trace::remap(e, &lines));
            return 2;
        }
    };
    let violations = check_all(&r);
    let failed = expect.map(|x| x.check(&r)).unwrap_or_default();
    let _ = write!(out, "{}", report::summary(&name, &r, &violations, &failed));
    if let Err(e) = report::write_report(report_path, &r) {
        let _ = writeln!(err, "cannot write {}: {e}", report_path.display());
        return 2;
    }
    if violations.is_empty() && failed.is_empty() {
        0
    } else {
        1
    }
}

fn cmd_export(
    config: SimConfig,
    report_path: Option<PathBuf>,
    builtin: Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let log = match (report_path, builtin) {
        (_, Some(name)) => {
            let sc = match builtin_scenario(&name) {
                Ok(sc) => sc,
                Err(e) => {
                    let _ = writeln!(err, "{e}");
                    return 2;
                }
            };
            match Simulator::run(config, &sc.events) {
                Ok(r) => r.log,
                Err(e) => {
                    let _ = writeln!(err, "{e}");
                    return 2;
                }
            }
        }
        (Some(path), None) => match report::read_report(&path) {
            Ok(r) => r.log,
            Err(e) => {
                let _ = writeln!(err, "cannot read report {}: {e}", path.display());
                return 2;
            }
        },
        (None, None) => unreachable!("clap requires a report or --builtin"),
    };
    let _ = write!(out, "{}", export::export(&log));
    0
}

fn cmd_serve(config: SimConfig, host: &str, port: u16, scenario: &str, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let listener = match TcpListener::bind((host, port)) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "cannot listen on {host}:{port}: {e}");
            return 2;
        }
    };
    match Bridge::spawn(listener, config, scenario) {
        Ok(bridge) => {
            let _ = writeln!(out, "listening on {} (scenario {scenario})", bridge.local_addr());
            let _ = out.flush();
            bridge.wait();
            0
        }
        Err(e) => {
            let _ = writeln!(err, "{e}");
            2
        }
    }
}

fn cell(s: &Stats) -> String {
    format!("{:.0}\u{00b1}{:.0} ({})", s.mean_ns, s.stddev_ns, s.max_ns)
}

/// Per-path table: mean\u{00b1}stddev (max) in nanoseconds.
pub fn bench_table(r: &BenchReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n={} (ns, mean\u{00b1}stddev (max))", r.n);
    let _ = writeln!(
        out,
        "{:<32} {:>24} {:>24} {:>24} {:>10}",
        "path", "granted", "blocked", "baseline", "overhead"
    );
    for p in &r.paths {
        let _ = writeln!(
            out,
            "{:<32} {:>24} {:>24} {:>24} {:>9.1}%",
            format!("{}/{}", p.op, p.device),
            cell(&p.granted),
            cell(&p.blocked),
            cell(&p.baseline),
            p.overhead_ratio * 100.0
        );
    }
    let _ = writeln!(out, "overall mean {:.0} ns", r.overall_mean_ns());
    out
}
