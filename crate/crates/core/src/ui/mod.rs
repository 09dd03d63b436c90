//! UI model: widget trees, states, actions and their prompt renderings.

mod action;
mod render;
mod widget;

use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use action::{derive_actions, derive_tree_actions, ActionData, ActionKind, PressKey, SwipeDirection, UIAction};
pub use render::{render_state, render_widget, render_widget_list, DEVICE_LINE};
pub use widget::{parse_view_hierarchy, Bounds, NodeId, PreOrder, Widget, WidgetFlags, WidgetTree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UiError {
    #[error("malformed view hierarchy: {0}")]
    MalformedXml(String),
    #[error("view hierarchy has no root element")]
    EmptyDocument,
    #[error("action target {0} does not exist in the current state")]
    UnresolvedTarget(NodeId),
    #[error("invalid action: {0}")]
    InvalidAction(String),
}

/// One observed screen. Every observation gets a fresh `state_id`, even
/// when the hierarchy is unchanged.
#[derive(Clone, Debug)]
pub struct UIState {
    pub state_id: String,
    pub activity_name: String,
    pub hierarchy: Arc<WidgetTree>,
    /// Free-text description standing in for the screenshot.
    pub visual_descriptor: String,
}

impl UIState {
    /// Builds a state outside any device session (tests, tooling).
    pub fn detached(
        state_id: impl Into<String>,
        activity_name: impl Into<String>,
        hierarchy: WidgetTree,
        visual_descriptor: impl Into<String>,
    ) -> Self {
        UIState {
            state_id: state_id.into(),
            activity_name: activity_name.into(),
            hierarchy: Arc::new(hierarchy),
            visual_descriptor: visual_descriptor.into(),
        }
    }

    pub fn fingerprint(&self) -> String {
        state_fingerprint(self)
    }
}

/// SHA-256 over the activity name and the canonical hierarchy
/// serialization. The visual descriptor and state id are excluded.
pub fn state_fingerprint(state: &UIState) -> String {
    let mut hasher = Sha256::new();
    hasher.update(state.activity_name.as_bytes());
    hasher.update([0u8]);
    hasher.update(state.hierarchy.to_xml().as_bytes());
    hex::encode(hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(id: &str, text: &str, visual: &str) -> UIState {
        let xml = format!(r#"<node class="FrameLayout"><node class="TextView" text="{text}"/></node>"#);
        UIState::detached(id, "MainActivity", parse_view_hierarchy(&xml).unwrap(), visual)
    }

    #[test]
    fn fingerprint_is_deterministic() {
        let a = state("s1", "Alarms", "x");
        assert_eq!(state_fingerprint(&a), state_fingerprint(&a));
        assert_eq!(state_fingerprint(&a), state_fingerprint(&state("s2", "Alarms", "x")));
    }

    #[test]
    fn fingerprint_sees_text_changes() {
        assert_ne!(
            state_fingerprint(&state("s1", "Alarms", "x")),
            state_fingerprint(&state("s1", "Alarm", "x"))
        );
    }

    #[test]
    fn fingerprint_ignores_visual_descriptor() {
        assert_eq!(
            state_fingerprint(&state("s1", "Alarms", "night mode")),
            state_fingerprint(&state("s1", "Alarms", "day mode"))
        );
    }

    #[test]
    fn fingerprint_sees_activity() {
        let mut other = state("s1", "Alarms", "x");
        other.activity_name = "SettingsActivity".into();
        assert_ne!(state_fingerprint(&other), state_fingerprint(&state("s1", "Alarms", "x")));
    }
}
