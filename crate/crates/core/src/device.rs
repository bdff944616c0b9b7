//! The simulated phone: apps, permissions, system services and I/O devices.
//!
//! Device acquisition is exclusive per device. Every acquisition and release
//! goes through [`DeviceTable`], which reports the transition to the hook
//! stream so the conditional engine can observe it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::hooks::{HookKind, HookStream};
use crate::ids::{AppId, SessionId};
use crate::Millis;

/// On-board I/O devices under mediation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeviceId {
    FrontCamera,
    BackCamera,
    Microphone,
    ScreenBuffer,
}

impl DeviceId {
    pub const ALL: [DeviceId; 4] = [
        DeviceId::FrontCamera,
        DeviceId::BackCamera,
        DeviceId::Microphone,
        DeviceId::ScreenBuffer,
    ];

    pub fn is_camera(self) -> bool {
        matches!(self, DeviceId::FrontCamera | DeviceId::BackCamera)
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceId::FrontCamera => "FrontCamera",
            DeviceId::BackCamera => "BackCamera",
            DeviceId::Microphone => "Microphone",
            DeviceId::ScreenBuffer => "ScreenBuffer",
        }
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Security-sensitive operations an app may ask a service to perform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OperationKind {
    TakePhoto,
    RecordVideo,
    RecordAudio,
    CaptureScreenshot,
    RecordScreen,
}

impl OperationKind {
    pub const ALL: [OperationKind; 5] = [
        OperationKind::TakePhoto,
        OperationKind::RecordVideo,
        OperationKind::RecordAudio,
        OperationKind::CaptureScreenshot,
        OperationKind::RecordScreen,
    ];

    /// Permissions the platform demands before a service performs the operation.
    pub fn required_permissions(self) -> PermissionSet {
        use Permission::*;
        match self {
            OperationKind::TakePhoto => PermissionSet::of(&[Camera, WriteExternalStorage]),
            OperationKind::RecordVideo => {
                PermissionSet::of(&[RecordAudio, Camera, WriteExternalStorage])
            }
            OperationKind::RecordAudio => PermissionSet::of(&[RecordAudio, WriteExternalStorage]),
            // Reading the screen buffer has no dedicated permission; only storing the result does.
            OperationKind::CaptureScreenshot | OperationKind::RecordScreen => {
                PermissionSet::of(&[WriteExternalStorage])
            }
        }
    }

    /// The system service that owns this operation.
    pub fn service(self) -> SystemServiceId {
        match self {
            OperationKind::TakePhoto | OperationKind::RecordVideo => SystemServiceId::MediaService,
            OperationKind::RecordAudio => SystemServiceId::AudioService,
            OperationKind::CaptureScreenshot | OperationKind::RecordScreen => {
                SystemServiceId::ScreenService
            }
        }
    }

    /// Whether `device` is an acceptable target named by a request for this operation.
    pub fn accepts_device(self, device: DeviceId) -> bool {
        match self {
            OperationKind::TakePhoto | OperationKind::RecordVideo => device.is_camera(),
            OperationKind::RecordAudio => device == DeviceId::Microphone,
            OperationKind::CaptureScreenshot | OperationKind::RecordScreen => {
                device == DeviceId::ScreenBuffer
            }
        }
    }

    /// Full device set acquired by a session for this operation on `device`.
    ///
    /// Returns `None` when the request names a device the operation cannot use.
    pub fn device_set(self, device: DeviceId) -> Option<Vec<DeviceId>> {
        if !self.accepts_device(device) {
            return None;
        }
        Some(match self {
            OperationKind::RecordVideo => alloc::vec![device, DeviceId::Microphone],
            _ => alloc::vec![device],
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OperationKind::TakePhoto => "TakePhoto",
            OperationKind::RecordVideo => "RecordVideo",
            OperationKind::RecordAudio => "RecordAudio",
            OperationKind::CaptureScreenshot => "CaptureScreenshot",
            OperationKind::RecordScreen => "RecordScreen",
        }
    }
}

impl fmt::Display for OperationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Free-function form of [`OperationKind::required_permissions`].
pub fn required_permissions(op: OperationKind) -> PermissionSet {
    op.required_permissions()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Permission {
    #[serde(rename = "CAMERA")]
    Camera,
    #[serde(rename = "RECORD_AUDIO")]
    RecordAudio,
    #[serde(rename = "WRITE_EXTERNAL_STORAGE")]
    WriteExternalStorage,
    #[serde(rename = "INTERNET")]
    Internet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtectionLevel {
    Normal,
    Dangerous,
}

impl Permission {
    pub const ALL: [Permission; 4] = [
        Permission::Camera,
        Permission::RecordAudio,
        Permission::WriteExternalStorage,
        Permission::Internet,
    ];

    pub fn protection_level(self) -> ProtectionLevel {
        ProtectionLevel::Dangerous
    }

    pub fn name(self) -> &'static str {
        match self {
            Permission::Camera => "CAMERA",
            Permission::RecordAudio => "RECORD_AUDIO",
            Permission::WriteExternalStorage => "WRITE_EXTERNAL_STORAGE",
            Permission::Internet => "INTERNET",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Permission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of [`Permission`]s, stored as a bitmask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Permission>", into = "Vec<Permission>")]
pub struct PermissionSet(u8);

impl PermissionSet {
    pub const EMPTY: PermissionSet = PermissionSet(0);

    pub fn of(perms: &[Permission]) -> Self {
        perms.iter().copied().collect()
    }

    /// The subset whose bits are set in `mask` (bit i = `Permission::ALL[i]`).
    pub fn from_mask(mask: u8) -> Self {
        PermissionSet(mask & 0x0f)
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn contains(self, p: Permission) -> bool {
        self.0 & p.bit() != 0
    }

    pub fn insert(&mut self, p: Permission) {
        self.0 |= p.bit();
    }

    pub fn remove(&mut self, p: Permission) {
        self.0 &= !p.bit();
    }

    pub fn is_subset(self, other: PermissionSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn difference(self, other: PermissionSet) -> PermissionSet {
        PermissionSet(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Permission> {
        Permission::ALL.into_iter().filter(move |p| self.contains(*p))
    }
}

impl FromIterator<Permission> for PermissionSet {
    fn from_iter<I: IntoIterator<Item = Permission>>(iter: I) -> Self {
        let mut set = PermissionSet::EMPTY;
        for p in iter {
            set.insert(p);
        }
        set
    }
}

impl From<Vec<Permission>> for PermissionSet {
    fn from(v: Vec<Permission>) -> Self {
        v.into_iter().collect()
    }
}

impl From<PermissionSet> for Vec<Permission> {
    fn from(s: PermissionSet) -> Self {
        s.iter().collect()
    }
}

impl fmt::Debug for PermissionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for PermissionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, p) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(p.name())?;
        }
        f.write_str("}")
    }
}

/// Every operation an app holding `perms` could perform without the user noticing
/// under the conventional permission model.
pub fn classify_stealth_capabilities(perms: PermissionSet) -> BTreeSet<OperationKind> {
    OperationKind::ALL
        .into_iter()
        .filter(|op| op.required_permissions().is_subset(perms))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SystemServiceId {
    MediaService,
    AudioService,
    ScreenService,
    InputService,
    DisplayService,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfirmMode {
    /// Releasing the finger inside the button confirms.
    ReleaseToConfirm,
    /// The operation runs while the finger stays down; lifting it ends the session.
    HoldToSustain,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftButton {
    pub button_id: String,
    /// App-controlled text. Never used by the monitor to describe an operation.
    pub label_text: String,
    pub declared_op: OperationKind,
    pub declared_device: DeviceId,
    pub confirm_mode: ConfirmMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lifecycle {
    Foreground,
    Background,
    NotRunning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppDescriptor {
    pub app_id: AppId,
    pub display_name: String,
    pub granted_permissions: PermissionSet,
    pub soft_buttons: Vec<SoftButton>,
    pub lifecycle: Lifecycle,
}

impl AppDescriptor {
    pub fn button(&self, button_id: &str) -> Option<&SoftButton> {
        self.soft_buttons.iter().find(|b| b.button_id == button_id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PermissionCheck {
    Granted,
    Denied { missing: PermissionSet },
}

impl PermissionCheck {
    pub fn is_granted(&self) -> bool {
        matches!(self, PermissionCheck::Granted)
    }
}

/// Package-manager style check of an app's grants against an operation.
///
/// Screen operations only ever check storage: screen-buffer access has no
/// permission of its own.
pub fn check_app_permissions(app: &AppDescriptor, op: OperationKind) -> PermissionCheck {
    let missing = op.required_permissions().difference(app.granted_permissions);
    if missing.is_empty() {
        PermissionCheck::Granted
    } else {
        PermissionCheck::Denied { missing }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("unknown app {0}")]
    UnknownApp(AppId),
    #[error("app {0} already installed")]
    AlreadyInstalled(AppId),
}

/// Installed apps and the single foreground slot.
#[derive(Clone, Debug, Default)]
pub struct AppRegistry {
    apps: BTreeMap<AppId, AppDescriptor>,
    foreground: Option<AppId>,
}

impl AppRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn install(&mut self, mut app: AppDescriptor) -> Result<(), RegistryError> {
        if self.apps.contains_key(&app.app_id) {
            return Err(RegistryError::AlreadyInstalled(app.app_id));
        }
        app.lifecycle = Lifecycle::NotRunning;
        self.apps.insert(app.app_id.clone(), app);
        Ok(())
    }

    pub fn uninstall(&mut self, app_id: &AppId) -> Result<AppDescriptor, RegistryError> {
        let app = self
            .apps
            .remove(app_id)
            .ok_or_else(|| RegistryError::UnknownApp(app_id.clone()))?;
        if self.foreground.as_ref() == Some(app_id) {
            self.foreground = None;
        }
        Ok(app)
    }

    pub fn get(&self, app_id: &AppId) -> Result<&AppDescriptor, RegistryError> {
        self.apps
            .get(app_id)
            .ok_or_else(|| RegistryError::UnknownApp(app_id.clone()))
    }

    pub fn get_mut(&mut self, app_id: &AppId) -> Result<&mut AppDescriptor, RegistryError> {
        self.apps
            .get_mut(app_id)
            .ok_or_else(|| RegistryError::UnknownApp(app_id.clone()))
    }

    pub fn contains(&self, app_id: &AppId) -> bool {
        self.apps.contains_key(app_id)
    }

    pub fn apps(&self) -> impl Iterator<Item = &AppDescriptor> {
        self.apps.values()
    }

    pub fn foreground(&self) -> Option<&AppDescriptor> {
        self.foreground.as_ref().and_then(|id| self.apps.get(id))
    }

    /// Brings `app_id` to the foreground. The previous foreground app moves to
    /// the background.
    pub fn set_foreground(&mut self, app_id: &AppId) -> Result<(), RegistryError> {
        if !self.apps.contains_key(app_id) {
            return Err(RegistryError::UnknownApp(app_id.clone()));
        }
        if let Some(prev) = self.foreground.take() {
            if let Some(app) = self.apps.get_mut(&prev) {
                app.lifecycle = Lifecycle::Background;
            }
        }
        if let Some(app) = self.apps.get_mut(app_id) {
            app.lifecycle = Lifecycle::Foreground;
        }
        self.foreground = Some(app_id.clone());
        Ok(())
    }

    /// Marks an app as running in the background (e.g. a started service).
    pub fn set_background(&mut self, app_id: &AppId) -> Result<(), RegistryError> {
        let app = self.get_mut(app_id)?;
        app.lifecycle = Lifecycle::Background;
        if self.foreground.as_ref() == Some(app_id) {
            self.foreground = None;
        }
        Ok(())
    }

    pub fn check_permissions(
        &self,
        app_id: &AppId,
        op: OperationKind,
    ) -> Result<PermissionCheck, RegistryError> {
        Ok(check_app_permissions(self.get(app_id)?, op))
    }

    pub fn display_name(&self, app_id: &AppId) -> String {
        self.apps
            .get(app_id)
            .map(|a| a.display_name.clone())
            .unwrap_or_else(|| app_id.as_str().into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Acquire {
    Acquired,
    Busy(SessionId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DeviceError {
    #[error("{device} is not held by {session}")]
    NotHolder { device: DeviceId, session: SessionId },
}

/// Holder table for the four devices. Each device has at most one holder.
#[derive(Clone, Debug, Default)]
pub struct DeviceTable {
    holders: [Option<SessionId>; 4],
}

impl DeviceTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn holder(&self, device: DeviceId) -> Option<SessionId> {
        self.holders[device.index()]
    }

    pub fn acquire(
        &mut self,
        device: DeviceId,
        session: SessionId,
        t: Millis,
        hooks: &mut HookStream,
    ) -> Acquire {
        match self.holders[device.index()] {
            Some(holder) => Acquire::Busy(holder),
            None => {
                self.holders[device.index()] = Some(session);
                hooks.emit(t, HookKind::DeviceAcquired { device, session });
                Acquire::Acquired
            }
        }
    }

    pub fn release(
        &mut self,
        device: DeviceId,
        session: SessionId,
        t: Millis,
        hooks: &mut HookStream,
    ) -> Result<(), DeviceError> {
        if self.holders[device.index()] != Some(session) {
            return Err(DeviceError::NotHolder { device, session });
        }
        self.holders[device.index()] = None;
        hooks.emit(t, HookKind::DeviceReleased { device, session });
        Ok(())
    }

    /// First device of `devices` that is currently held, with its holder.
    pub fn first_busy(&self, devices: &[DeviceId]) -> Option<(DeviceId, SessionId)> {
        devices
            .iter()
            .find_map(|d| self.holder(*d).map(|s| (*d, s)))
    }

    pub fn held(&self) -> impl Iterator<Item = (DeviceId, SessionId)> + '_ {
        DeviceId::ALL
            .into_iter()
            .filter_map(|d| self.holder(d).map(|s| (d, s)))
    }
}
