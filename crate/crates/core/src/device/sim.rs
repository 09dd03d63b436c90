use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::ui::{UIAction, UIState};

use super::{Device, DeviceError, ModelError, SimApp, SimConfig, SnapshotId, StepResult};

static NEXT_SESSION: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Debug)]
struct Saved {
    config: SimConfig,
    crash: Option<String>,
}

/// Deterministic device backed by a [`SimApp`] state machine.
#[derive(Debug)]
pub struct SimDevice {
    app: Arc<SimApp>,
    session: u64,
    config: SimConfig,
    crash: Option<String>,
    snapshots: HashMap<u64, Saved>,
    next_snapshot: u64,
    next_state_id: u64,
}

impl SimDevice {
    pub fn new(app: Arc<SimApp>) -> Self {
        let config = app.initial_config();
        SimDevice {
            app,
            session: NEXT_SESSION.fetch_add(1, Ordering::Relaxed),
            config,
            crash: None,
            snapshots: HashMap::new(),
            next_snapshot: 0,
            next_state_id: 0,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Ok(SimDevice::new(Arc::new(SimApp::load(path)?)))
    }

    pub fn app(&self) -> &Arc<SimApp> {
        &self.app
    }

    /// Current simulator position (state key and variables).
    pub fn position(&self) -> &SimConfig {
        &self.config
    }

    fn materialize(&mut self, key: &str) -> UIState {
        let state = self.app.state(key);
        let id = self.next_state_id;
        self.next_state_id += 1;
        UIState {
            state_id: format!("s{id}"),
            activity_name: state.activity_name.clone(),
            hierarchy: Arc::clone(&state.hierarchy),
            visual_descriptor: state.visual_descriptor.clone(),
        }
    }
}

impl Device for SimDevice {
    fn reset(&mut self) -> Result<UIState, DeviceError> {
        self.config = self.app.initial_config();
        self.crash = None;
        let key = self.config.state.clone();
        Ok(self.materialize(&key))
    }

    fn capture_screen(&mut self) -> Result<UIState, DeviceError> {
        if self.crash.is_some() {
            return Err(DeviceError::SessionCrashed);
        }
        let key = self.config.state.clone();
        Ok(self.materialize(&key))
    }

    fn execute(&mut self, action: &UIAction) -> Result<StepResult, DeviceError> {
        if self.crash.is_some() {
            return Err(DeviceError::SessionCrashed);
        }
        let next = self.app.step(&self.config, action)?;
        let entered = next.state != self.config.state;
        self.config = next;
        let key = self.config.state.clone();
        let crash_record = if entered {
            self.app.crash_bug_at(&key).and_then(|b| b.crash_log_text.clone())
        } else {
            None
        };
        self.crash = crash_record.clone();
        Ok(StepResult {
            new_state: self.materialize(&key),
            crashed: crash_record.is_some(),
            crash_record,
        })
    }

    fn snapshot(&mut self) -> Result<SnapshotId, DeviceError> {
        let seq = self.next_snapshot;
        self.next_snapshot += 1;
        self.snapshots.insert(seq, Saved { config: self.config.clone(), crash: self.crash.clone() });
        Ok(SnapshotId { session: self.session, seq })
    }

    fn rollback(&mut self, id: SnapshotId) -> Result<(), DeviceError> {
        if id.session != self.session {
            return Err(DeviceError::UnknownSnapshot(id));
        }
        let saved = self.snapshots.get(&id.seq).ok_or(DeviceError::UnknownSnapshot(id))?;
        self.config = saved.config.clone();
        self.crash = saved.crash.clone();
        Ok(())
    }

    fn release_snapshot(&mut self, id: SnapshotId) {
        if id.session == self.session {
            self.snapshots.remove(&id.seq);
        }
    }

    fn crash_log(&self) -> Option<String> {
        self.crash.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ui::{NodeId, PressKey};

    const APP: &str = r#"{
        "schema": 1, "app_name": "two", "initial_state": "home",
        "states": {
          "home": { "activity": "MainActivity", "visual": "home screen",
                    "hierarchy_xml": "<node class=\"FrameLayout\"><node class=\"Button\" text=\"Boom\" clickable=\"true\"/><node class=\"Button\" text=\"Next\" clickable=\"true\"/></node>" },
          "next": { "activity": "NextActivity", "visual": "next screen",
                    "hierarchy_xml": "<node class=\"FrameLayout\"/>" },
          "dead": { "activity": "MainActivity", "visual": "crash dialog",
                    "hierarchy_xml": "<node class=\"FrameLayout\"/>" }
        },
        "rules": [
          { "from": "home", "on": { "kind": "Click", "target_text": "Boom" }, "to": "dead" },
          { "from": "home", "on": { "kind": "Click", "target_text": "Next" }, "to": "next" },
          { "from": "next", "on": { "kind": "Press", "key": "Back" }, "to": "home" }
        ],
        "bugs": [ { "id": "boom", "kind": "Crash", "trigger": "dead",
                    "crash_log": "FATAL EXCEPTION: main\njava.lang.IllegalStateException: boom" } ]
    }"#;

    fn device() -> SimDevice {
        SimDevice::new(Arc::new(SimApp::from_json(APP).unwrap()))
    }

    #[test]
    fn reset_is_deterministic() {
        let mut d = device();
        let a = d.reset().unwrap();
        let b = d.reset().unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.state_id, b.state_id);
        assert_eq!(a.activity_name, "MainActivity");
    }

    #[test]
    fn captures_get_fresh_ids() {
        let mut d = device();
        d.reset().unwrap();
        let a = d.capture_screen().unwrap();
        let b = d.capture_screen().unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.state_id, b.state_id);
    }

    #[test]
    fn crash_then_capture_fails_until_reset() {
        let mut d = device();
        d.reset().unwrap();
        assert_eq!(d.crash_log(), None);
        let step = d.execute(&UIAction::click(NodeId(1))).unwrap();
        assert!(step.crashed);
        assert!(step.crash_record.as_deref().unwrap().contains("IllegalStateException"));
        assert!(d.crash_log().unwrap().contains("IllegalStateException"));
        assert!(matches!(d.capture_screen(), Err(DeviceError::SessionCrashed)));
        assert!(matches!(d.execute(&UIAction::rotate()), Err(DeviceError::SessionCrashed)));
        d.reset().unwrap();
        assert_eq!(d.crash_log(), None);
    }

    #[test]
    fn unmatched_action_self_loops() {
        let mut d = device();
        let before = d.reset().unwrap();
        let step = d.execute(&UIAction::rotate()).unwrap();
        assert!(!step.crashed);
        assert_eq!(step.new_state.fingerprint(), before.fingerprint());
        assert_ne!(step.new_state.state_id, before.state_id);
    }

    #[test]
    fn unresolved_target() {
        let mut d = device();
        d.reset().unwrap();
        assert_eq!(
            d.execute(&UIAction::click(NodeId(42))).unwrap_err(),
            DeviceError::UnresolvedTarget(NodeId(42))
        );
    }

    #[test]
    fn snapshot_round_trip_restores_crash_status() {
        let mut d = device();
        let start = d.reset().unwrap();
        let snap = d.snapshot().unwrap();
        d.execute(&UIAction::click(NodeId(2))).unwrap();
        d.rollback(snap).unwrap();
        assert_eq!(d.capture_screen().unwrap().fingerprint(), start.fingerprint());

        d.execute(&UIAction::click(NodeId(1))).unwrap();
        let crashed = d.snapshot().unwrap();
        d.rollback(snap).unwrap();
        assert_eq!(d.crash_log(), None);
        d.rollback(crashed).unwrap();
        assert!(d.crash_log().is_some());
    }

    #[test]
    fn stale_snapshot_from_other_session() {
        let mut first = device();
        first.reset().unwrap();
        let token = first.snapshot().unwrap();
        let mut second = device();
        second.reset().unwrap();
        assert_eq!(second.rollback(token), Err(DeviceError::UnknownSnapshot(token)));
        first.release_snapshot(token);
        assert_eq!(first.rollback(token), Err(DeviceError::UnknownSnapshot(token)));
    }

    #[test]
    fn back_navigation() {
        let mut d = device();
        d.reset().unwrap();
        let next = d.execute(&UIAction::click(NodeId(2))).unwrap();
        assert_eq!(next.new_state.activity_name, "NextActivity");
        let home = d.execute(&UIAction::press(PressKey::Back)).unwrap();
        assert_eq!(home.new_state.activity_name, "MainActivity");
    }
}
