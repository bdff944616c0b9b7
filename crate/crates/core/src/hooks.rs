//! Mediation hooks: the interception layer in front of the conditional engine.
//!
//! Every request passes the conventional permission check first. Requests that
//! fail it never reach the engine. Device acquisitions and releases, input
//! events and device data deliveries are tapped into one ordered hook stream.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::device::{DeviceId, OperationKind, PermissionCheck, PermissionSet, SystemServiceId};
use crate::engine::{Monitor, MonitorError};
use crate::gesture::GestureKind;
use crate::ids::{AppId, BindingId, RequestId, SessionId};
use crate::rules::RuleSet;
use crate::Millis;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Direct,
    /// The request serves an intent sent by another app.
    ViaIntent(AppId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRequest {
    pub request_id: RequestId,
    pub app_id: AppId,
    pub service: SystemServiceId,
    pub op: OperationKind,
    pub device: DeviceId,
    pub t: Millis,
    pub origin: Origin,
}

impl AccessRequest {
    /// The app whose user interaction must justify this request.
    pub fn charged_app(&self) -> &AppId {
        match &self.origin {
            Origin::Direct => &self.app_id,
            Origin::ViaIntent(from) => from,
        }
    }
}

/// What an app hands to a system service. The monitor stamps id and time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestSpec {
    pub app_id: AppId,
    pub op: OperationKind,
    pub device: DeviceId,
    pub origin: Origin,
    /// Service the request was routed through; `None` means the owning service.
    pub service: Option<SystemServiceId>,
}

impl RequestSpec {
    pub fn direct(app_id: impl Into<AppId>, op: OperationKind, device: DeviceId) -> Self {
        Self { app_id: app_id.into(), op, device, origin: Origin::Direct, service: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HookKind {
    RequestArrived {
        request_id: RequestId,
        app_id: AppId,
        service: SystemServiceId,
        op: OperationKind,
        device: DeviceId,
    },
    DeviceAcquired { device: DeviceId, session: SessionId },
    DeviceReleased { device: DeviceId, session: SessionId },
    InputEvent(GestureKind),
    /// One frame of device data delivered to the session holding the device.
    SensorRead { device: DeviceId, session: SessionId },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HookEvent {
    pub t: Millis,
    pub kind: HookKind,
}

/// Single ordered queue of hook callbacks. Order equals emission order.
#[derive(Clone, Debug, Default)]
pub struct HookStream {
    events: Vec<HookEvent>,
}

impl HookStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn emit(&mut self, t: Millis, kind: HookKind) {
        self.events.push(HookEvent { t, kind });
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &HookEvent> {
        self.events.iter()
    }

    pub fn as_slice(&self) -> &[HookEvent] {
        &self.events
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MediationStage {
    ConventionalDenied,
    AwareBlocked,
    AwareDenied,
    Granted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeDetail {
    MissingPermissions(PermissionSet),
    DeviceBusy { device: DeviceId, holder: SessionId },
    Unsatisfied(RuleSet),
    Session(SessionId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediationOutcome {
    pub request_id: RequestId,
    pub t: Millis,
    pub stage: MediationStage,
    pub detail: OutcomeDetail,
}

/// Immediate result of intercepting a request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mediation {
    Decided(MediationOutcome),
    /// Waiting on the user: the request is attached to a held binding.
    Deferred { request_id: RequestId, binding: BindingId },
}

impl Mediation {
    pub fn outcome(&self) -> Option<&MediationOutcome> {
        match self {
            Mediation::Decided(o) => Some(o),
            Mediation::Deferred { .. } => None,
        }
    }
}

impl Monitor {
    /// Entry point for every app request to a system service.
    pub fn intercept_request(&mut self, spec: RequestSpec) -> Result<Mediation, MonitorError> {
        self.registry().get(&spec.app_id)?;
        if !spec.op.accepts_device(spec.device) {
            return Err(MonitorError::InvalidDevice { op: spec.op, device: spec.device });
        }
        let req = AccessRequest {
            request_id: self.next_request_id(),
            service: spec.service.unwrap_or_else(|| spec.op.service()),
            app_id: spec.app_id,
            op: spec.op,
            device: spec.device,
            t: self.now(),
            origin: spec.origin,
        };
        self.emit_hook(HookKind::RequestArrived {
            request_id: req.request_id,
            app_id: req.app_id.clone(),
            service: req.service,
            op: req.op,
            device: req.device,
        });

        if let PermissionCheck::Denied { missing } = self.registry().check_permissions(&req.app_id, req.op)? {
            return Ok(Mediation::Decided(self.record_outcome(
                req.request_id,
                MediationStage::ConventionalDenied,
                OutcomeDetail::MissingPermissions(missing),
            )));
        }
        let devices = req.op.device_set(req.device).unwrap_or_default();
        if let Some((device, holder)) = self.devices().first_busy(&devices) {
            return Ok(Mediation::Decided(self.record_outcome(
                req.request_id,
                MediationStage::ConventionalDenied,
                OutcomeDetail::DeviceBusy { device, holder },
            )));
        }
        self.decide(req)
    }

    pub fn emit_hook(&mut self, kind: HookKind) {
        let t = self.now();
        self.hooks_mut().emit(t, kind);
    }
}
