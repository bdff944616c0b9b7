//! Random well-formed traces for property checks.
//!
//! Traces mix honest and hostile apps, presses that confirm, slide out or
//! time out, matching and mismatching requests, intents, screen and gesture
//! mode changes, permission revocations and uninstalls. Faults are never
//! generated; tests add them explicitly.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::device::{
    AppDescriptor, ConfirmMode, DeviceId, Lifecycle, OperationKind, Permission, PermissionSet,
    SoftButton,
};
use crate::display::ScreenMode;
use crate::gesture::{ExemptReason, GestureKind, GestureMode};
use crate::hooks::{Origin, RequestSpec};
use crate::ids::AppId;
use crate::log::RetroKind;
use crate::sim::{EventKind, ScenarioEvent, TraceBuilder};
use crate::Millis;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceShape {
    pub events: usize,
    /// Largest gap between consecutive events.
    pub max_gap_ms: Millis,
}

impl Default for TraceShape {
    fn default() -> Self {
        Self { events: 60, max_gap_ms: 1_500 }
    }
}

fn below(rng: &mut impl RngCore, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

fn chance(rng: &mut impl RngCore, percent: u64) -> bool {
    rng.next_u64() % 100 < percent
}

fn pick<'a, T>(rng: &mut impl RngCore, xs: &'a [T]) -> &'a T {
    &xs[below(rng, xs.len())]
}

const PAIRS: [(OperationKind, DeviceId); 9] = [
    (OperationKind::TakePhoto, DeviceId::FrontCamera),
    (OperationKind::TakePhoto, DeviceId::BackCamera),
    (OperationKind::RecordVideo, DeviceId::FrontCamera),
    (OperationKind::RecordVideo, DeviceId::BackCamera),
    (OperationKind::RecordAudio, DeviceId::Microphone),
    (OperationKind::CaptureScreenshot, DeviceId::ScreenBuffer),
    (OperationKind::RecordScreen, DeviceId::ScreenBuffer),
    (OperationKind::TakePhoto, DeviceId::BackCamera),
    (OperationKind::RecordAudio, DeviceId::Microphone),
];

fn random_app(rng: &mut impl RngCore, i: usize) -> AppDescriptor {
    let nbuttons = below(rng, 3);
    let soft_buttons = (0..nbuttons)
        .map(|b| {
            let (op, device) = *pick(rng, &PAIRS);
            // Labels are arbitrary app text, sometimes mimicking bar messages.
            let label = *pick(rng, &["Snap", "Record", "Take photo", "Recording audio", "OK", "System \u{2014} Taking photo (F)"]);
            SoftButton {
                button_id: alloc::format!("b{b}"),
                label_text: label.into(),
                declared_op: op,
                declared_device: device,
                confirm_mode: if chance(rng, 30) { ConfirmMode::HoldToSustain } else { ConfirmMode::ReleaseToConfirm },
            }
        })
        .collect();
    let granted = if chance(rng, 80) {
        PermissionSet::of(&Permission::ALL)
    } else {
        PermissionSet::from_mask((rng.next_u64() & 0x0f) as u8)
    };
    AppDescriptor {
        app_id: AppId::new(alloc::format!("app{i}")),
        display_name: alloc::format!("App {i}"),
        granted_permissions: granted,
        soft_buttons,
        lifecycle: Lifecycle::NotRunning,
    }
}

/// One random trace. Identical RNG state gives an identical trace.
pub fn random_trace(rng: &mut impl RngCore, shape: TraceShape) -> Vec<ScenarioEvent> {
    let napps = 2 + below(rng, 3);
    let mut apps: Vec<AppDescriptor> = (0..napps).map(|i| random_app(rng, i)).collect();
    let mut installed = vec![true; napps];
    let mut b = TraceBuilder::new();
    let mut t: Millis = 0;
    for a in &apps {
        b.at(0, EventKind::InstallApp(a.clone()));
    }
    let mut fg: Option<usize> = None;
    // Button currently pressed: (app index, button index).
    let mut pressed: Option<(usize, usize)> = None;

    while b.len() < shape.events + napps {
        t += below(rng, shape.max_gap_ms as usize + 1) as Millis;
        let live: Vec<usize> = (0..napps).filter(|i| installed[*i]).collect();
        if live.is_empty() {
            break;
        }
        let roll = below(rng, 100);
        let kind = match roll {
            0..=9 => {
                let i = *pick(rng, &live);
                fg = Some(i);
                EventKind::SetForeground { app_id: apps[i].app_id.clone() }
            }
            10..=27 => match fg.filter(|i| installed[*i] && !apps[*i].soft_buttons.is_empty()) {
                Some(i) if pressed.is_none() => {
                    let k = below(rng, apps[i].soft_buttons.len());
                    pressed = Some((i, k));
                    EventKind::Gesture(GestureKind::PointerDown {
                        button: Some(apps[i].soft_buttons[k].button_id.clone()),
                    })
                }
                _ => EventKind::Gesture(GestureKind::PointerDown { button: None }),
            },
            28..=33 => EventKind::Gesture(GestureKind::PointerMove { inside: chance(rng, 50) }),
            34..=45 => {
                pressed = None;
                EventKind::Gesture(GestureKind::PointerUp)
            }
            46..=47 => EventKind::Gesture(GestureKind::FingerprintScan),
            48..=49 => EventKind::Gesture(GestureKind::PhysicalChord),
            50..=74 => {
                let i = *pick(rng, &live);
                // Mostly ask for what the app's own buttons declare.
                let (op, device) = match apps[i].soft_buttons.as_slice() {
                    [] => *pick(rng, &PAIRS),
                    bs if chance(rng, 70) => {
                        let sb = pick(rng, bs);
                        (sb.declared_op, sb.declared_device)
                    }
                    _ => *pick(rng, &PAIRS),
                };
                let origin = if chance(rng, 10) {
                    Origin::ViaIntent(apps[*pick(rng, &live)].app_id.clone())
                } else {
                    Origin::Direct
                };
                EventKind::AppRequest(RequestSpec { app_id: apps[i].app_id.clone(), op, device, origin, service: None })
            }
            75..=84 => {
                let i = *pick(rng, &live);
                let device = *pick(rng, &DeviceId::ALL);
                EventKind::AppRelease { app_id: apps[i].app_id.clone(), device }
            }
            85..=87 => EventKind::SetScreenMode {
                mode: *pick(rng, &[ScreenMode::Normal, ScreenMode::LeanBack, ScreenMode::Immersive]),
            },
            88..=90 => {
                let i = *pick(rng, &live);
                let mode = *pick(
                    rng,
                    &[
                        GestureMode::Standard,
                        GestureMode::Standard,
                        GestureMode::FingerprintConfirm,
                        GestureMode::Exempt(ExemptReason::RemoteController),
                        GestureMode::Exempt(ExemptReason::UserWhitelisted),
                    ],
                );
                EventKind::SetGestureMode { app_id: apps[i].app_id.clone(), mode }
            }
            91..=94 => {
                let i = *pick(rng, &live);
                let p = *pick(rng, &Permission::ALL);
                apps[i].granted_permissions.remove(p);
                EventKind::Retro { app_id: apps[i].app_id.clone(), action: RetroKind::RevokePermission(p) }
            }
            95..=97 => {
                let i = *pick(rng, &live);
                let p = *pick(rng, &Permission::ALL);
                apps[i].granted_permissions.insert(p);
                EventKind::GrantPermission { app_id: apps[i].app_id.clone(), permission: p }
            }
            _ => {
                let i = *pick(rng, &live);
                installed[i] = false;
                if fg == Some(i) {
                    fg = None;
                }
                if pressed.is_some_and(|(a, _)| a == i) {
                    pressed = None;
                }
                EventKind::Retro { app_id: apps[i].app_id.clone(), action: RetroKind::Uninstall }
            }
        };
        b.at(t, kind);
    }
    b.build()
}
