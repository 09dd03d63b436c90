//! Device contract and the simulated backend.
//!
//! A device session is a single logical actor; callers serialize every
//! operation on one session. Distinct sessions share nothing.

mod model;
mod sim;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ui::{NodeId, UIAction, UIState};

pub use model::{
    ActionMatcher, ActionPattern, BugKind, Effect, GroundTruth, ModelError, SimApp, SimBug, SimConfig,
    SimRule, SimState, TargetSelector, VarValue, SCHEMA_VERSION,
};
pub use sim::SimDevice;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("action target {0} does not exist on the current screen")]
    UnresolvedTarget(NodeId),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("the app crashed; reset or roll back before interacting again")]
    SessionCrashed,
    #[error("unknown or stale snapshot {0}")]
    UnknownSnapshot(SnapshotId),
    #[error("action budget exhausted")]
    ActionBudgetExhausted,
    #[error("time budget exhausted")]
    TimeBudgetExhausted,
    #[error("device backend failure: {0}")]
    Backend(String),
}

/// Opaque token naming a saved device position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SnapshotId {
    pub session: u64,
    pub seq: u64,
}

impl fmt::Display for SnapshotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.session, self.seq)
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub new_state: UIState,
    pub crashed: bool,
    /// Present iff `crashed`.
    pub crash_record: Option<String>,
}

/// What the engine needs from a device under test.
pub trait Device {
    /// Launches the app afresh and clears any pending crash.
    fn reset(&mut self) -> Result<UIState, DeviceError>;

    fn capture_screen(&mut self) -> Result<UIState, DeviceError>;

    fn execute(&mut self, action: &UIAction) -> Result<StepResult, DeviceError>;

    fn snapshot(&mut self) -> Result<SnapshotId, DeviceError>;

    fn rollback(&mut self, id: SnapshotId) -> Result<(), DeviceError>;

    /// Hint that a snapshot is no longer needed.
    fn release_snapshot(&mut self, _id: SnapshotId) {}

    /// Pending crash record, if the app has crashed since the last reset.
    fn crash_log(&self) -> Option<String>;
}

impl<D: Device + ?Sized> Device for &mut D {
    fn reset(&mut self) -> Result<UIState, DeviceError> {
        (**self).reset()
    }

    fn capture_screen(&mut self) -> Result<UIState, DeviceError> {
        (**self).capture_screen()
    }

    fn execute(&mut self, action: &UIAction) -> Result<StepResult, DeviceError> {
        (**self).execute(action)
    }

    fn snapshot(&mut self) -> Result<SnapshotId, DeviceError> {
        (**self).snapshot()
    }

    fn rollback(&mut self, id: SnapshotId) -> Result<(), DeviceError> {
        (**self).rollback(id)
    }

    fn release_snapshot(&mut self, id: SnapshotId) {
        (**self).release_snapshot(id)
    }

    fn crash_log(&self) -> Option<String> {
        (**self).crash_log()
    }
}
