//! Mediation microbenchmark.
//!
//! Each device path is measured three ways: a request that is granted after a
//! confirmed gesture, a background request that is blocked, and the
//! conventional permission and availability check alone (the baseline an
//! unmodified platform would run). Only the interception call is timed; the
//! gestures and releases around it are not.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::device::{
    AppDescriptor, ConfirmMode, DeviceId, Lifecycle, OperationKind, Permission, PermissionSet,
    SoftButton,
};
use crate::engine::{Monitor, MonitorConfig};
use crate::gesture::{GestureEvent, GestureKind};
use crate::hooks::{MediationStage, RequestSpec};
use crate::ids::AppId;
use crate::Millis;

/// Source of host time. The core never reads a clock on its own.
pub trait Stopwatch {
    fn now_ns(&self) -> u64;
}

/// Always reads zero; used when latencies are irrelevant.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullStopwatch;

impl Stopwatch for NullStopwatch {
    fn now_ns(&self) -> u64 {
        0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: u64,
    pub mean_ns: f64,
    /// Population standard deviation.
    pub stddev_ns: f64,
    pub max_ns: u64,
}

impl Stats {
    pub fn from_samples(samples: &[u64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let n = samples.len() as f64;
        let mean = samples.iter().map(|&s| s as f64).sum::<f64>() / n;
        let var = samples.iter().map(|&s| (s as f64 - mean) * (s as f64 - mean)).sum::<f64>() / n;
        Self {
            n: samples.len() as u64,
            mean_ns: mean,
            stddev_ns: sqrt(var),
            max_ns: samples.iter().copied().max().unwrap_or(0),
        }
    }
}

// Newton iteration; `f64::sqrt` is not in core.
fn sqrt(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut g = if x > 1.0 { x / 2.0 } else { 1.0 };
    for _ in 0..64 {
        let next = 0.5 * (g + x / g);
        if (next - g).abs() <= f64::EPSILON * next {
            return next;
        }
        g = next;
    }
    g
}

/// `(aware - baseline) / baseline`.
pub fn overhead_ratio(aware_mean: f64, baseline_mean: f64) -> f64 {
    if baseline_mean == 0.0 {
        return 0.0;
    }
    (aware_mean - baseline_mean) / baseline_mean
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub op: OperationKind,
    pub device: DeviceId,
    pub granted: Stats,
    pub blocked: Stats,
    pub baseline: Stats,
    /// Overhead of the granted path over the baseline.
    pub overhead_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n: u64,
    pub paths: Vec<PathStats>,
}

impl BenchReport {
    /// Mean over every granted and blocked sample of every path.
    pub fn overall_mean_ns(&self) -> f64 {
        let (sum, n) = self.paths.iter().fold((0.0, 0u64), |(sum, n), p| {
            (
                sum + p.granted.mean_ns * p.granted.n as f64 + p.blocked.mean_ns * p.blocked.n as f64,
                n + p.granted.n + p.blocked.n,
            )
        });
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Device paths measured by [`bench`].
pub const BENCH_PATHS: [(OperationKind, DeviceId); 4] = [
    (OperationKind::TakePhoto, DeviceId::FrontCamera),
    (OperationKind::TakePhoto, DeviceId::BackCamera),
    (OperationKind::RecordAudio, DeviceId::Microphone),
    (OperationKind::CaptureScreenshot, DeviceId::ScreenBuffer),
];

const STEP_MS: Millis = 10;

fn bench_apps(op: OperationKind, device: DeviceId) -> (AppDescriptor, AppDescriptor) {
    let all = PermissionSet::of(&Permission::ALL);
    let fg = AppDescriptor {
        app_id: AppId::new("bench.fg"),
        display_name: "Bench".into(),
        granted_permissions: all,
        soft_buttons: alloc::vec![SoftButton {
            button_id: "go".into(),
            label_text: "Go".into(),
            declared_op: op,
            declared_device: device,
            confirm_mode: ConfirmMode::ReleaseToConfirm,
        }],
        lifecycle: Lifecycle::Foreground,
    };
    let bg = AppDescriptor {
        app_id: AppId::new("bench.bg"),
        display_name: "Background".into(),
        granted_permissions: all,
        soft_buttons: Vec::new(),
        lifecycle: Lifecycle::Background,
    };
    (fg, bg)
}

fn measure_path<S: Stopwatch>(n: usize, op: OperationKind, device: DeviceId, sw: &S) -> PathStats {
    let (fg, bg) = bench_apps(op, device);
    let (fg_id, bg_id) = (fg.app_id.clone(), bg.app_id.clone());
    let mut m = Monitor::new(MonitorConfig::default());
    m.install_app(fg).expect("fresh monitor");
    m.install_app(bg).expect("fresh monitor");
    m.set_foreground(&fg_id).expect("installed");

    let mut t: Millis = 0;
    let mut granted = Vec::with_capacity(n);
    let mut blocked = Vec::with_capacity(n);
    let mut baseline = Vec::with_capacity(n);
    for _ in 0..n {
        t += STEP_MS;
        m.advance_timers(t);
        m.on_gesture(GestureEvent { kind: GestureKind::PointerDown { button: Some("go".into()) }, t });
        m.on_gesture(GestureEvent { kind: GestureKind::PointerUp, t });

        let start = sw.now_ns();
        let r = m.intercept_request(RequestSpec::direct(fg_id.clone(), op, device));
        granted.push(sw.now_ns().saturating_sub(start));
        let stage = r.ok().and_then(|r| r.outcome().map(|o| o.stage));
        assert_eq!(stage, Some(MediationStage::Granted), "bench granted path must grant");
        m.app_release(&fg_id, device).expect("session holds device");

        let start = sw.now_ns();
        let r = m.intercept_request(RequestSpec::direct(bg_id.clone(), op, device));
        blocked.push(sw.now_ns().saturating_sub(start));
        let stage = r.ok().and_then(|r| r.outcome().map(|o| o.stage));
        assert_eq!(stage, Some(MediationStage::AwareBlocked), "bench blocked path must block");

        let start = sw.now_ns();
        let ok = m.registry().check_permissions(&fg_id, op).map(|c| c.is_granted()).unwrap_or(false)
            && m.devices().first_busy(&[device]).is_none();
        baseline.push(sw.now_ns().saturating_sub(start));
        assert!(ok);
    }
    let granted = Stats::from_samples(&granted);
    let baseline = Stats::from_samples(&baseline);
    PathStats {
        op,
        device,
        granted,
        blocked: Stats::from_samples(&blocked),
        baseline,
        overhead_ratio: overhead_ratio(granted.mean_ns, baseline.mean_ns),
    }
}

/// Runs `n` granted and `n` blocked decisions per device path.
pub fn bench<S: Stopwatch>(n: usize, stopwatch: &S) -> BenchReport {
    let n = n.max(1);
    BenchReport {
        n: n as u64,
        paths: BENCH_PATHS.iter().map(|&(op, d)| measure_path(n, op, d, stopwatch)).collect(),
    }
}
