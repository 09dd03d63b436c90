use std::fmt;

use serde::{Deserialize, Serialize};

use super::render::render_widget;
use super::widget::{NodeId, Widget, WidgetTree};
use super::{UIState, UiError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Click,
    LongClick,
    Swipe,
    InputText,
    Rotate,
    Press,
}

impl ActionKind {
    pub fn needs_target(self) -> bool {
        matches!(self, ActionKind::Click | ActionKind::LongClick | ActionKind::InputText)
    }

    pub fn forbids_target(self) -> bool {
        matches!(self, ActionKind::Rotate | ActionKind::Press)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwipeDirection {
    Up,
    Down,
    Left,
    Right,
}

impl SwipeDirection {
    pub const ALL: [SwipeDirection; 4] = [
        SwipeDirection::Up,
        SwipeDirection::Down,
        SwipeDirection::Left,
        SwipeDirection::Right,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SwipeDirection::Up => "up",
            SwipeDirection::Down => "down",
            SwipeDirection::Left => "left",
            SwipeDirection::Right => "right",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PressKey {
    Back,
    Enter,
    Delete,
    Home,
}

impl PressKey {
    pub const ALL: [PressKey; 4] = [PressKey::Back, PressKey::Enter, PressKey::Delete, PressKey::Home];

    pub fn as_str(self) -> &'static str {
        match self {
            PressKey::Back => "Back",
            PressKey::Enter => "Enter",
            PressKey::Delete => "Delete",
            PressKey::Home => "Home",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionData {
    Direction(SwipeDirection),
    Text(String),
    Key(PressKey),
}

/// One UI action: a kind, an optional target widget and an optional payload.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UIAction {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<ActionData>,
}

impl UIAction {
    pub fn click(target: NodeId) -> Self {
        UIAction { kind: ActionKind::Click, target: Some(target), data: None }
    }

    pub fn long_click(target: NodeId) -> Self {
        UIAction { kind: ActionKind::LongClick, target: Some(target), data: None }
    }

    /// InputText with its payload still to be generated.
    pub fn input_text(target: NodeId) -> Self {
        UIAction { kind: ActionKind::InputText, target: Some(target), data: None }
    }

    pub fn input(target: NodeId, text: impl Into<String>) -> Self {
        UIAction {
            kind: ActionKind::InputText,
            target: Some(target),
            data: Some(ActionData::Text(text.into())),
        }
    }

    pub fn swipe(target: Option<NodeId>, direction: SwipeDirection) -> Self {
        UIAction { kind: ActionKind::Swipe, target, data: Some(ActionData::Direction(direction)) }
    }

    pub fn rotate() -> Self {
        UIAction { kind: ActionKind::Rotate, target: None, data: None }
    }

    pub fn press(key: PressKey) -> Self {
        UIAction { kind: ActionKind::Press, target: None, data: Some(ActionData::Key(key)) }
    }

    pub fn input_payload(&self) -> Option<&str> {
        match &self.data {
            Some(ActionData::Text(t)) => Some(t),
            _ => None,
        }
    }

    pub fn direction(&self) -> Option<SwipeDirection> {
        match self.data {
            Some(ActionData::Direction(d)) => Some(d),
            _ => None,
        }
    }

    pub fn key(&self) -> Option<PressKey> {
        match self.data {
            Some(ActionData::Key(k)) => Some(k),
            _ => None,
        }
    }

    /// Short label used in widget lists: `Click`, `Swipe(up)`, `Press(Back)`.
    pub fn label(&self) -> String {
        match (self.kind, &self.data) {
            (ActionKind::Swipe, Some(ActionData::Direction(d))) => format!("Swipe({})", d.as_str()),
            (ActionKind::Press, Some(ActionData::Key(k))) => format!("Press({})", k.as_str()),
            (kind, _) => kind.to_string(),
        }
    }

    /// Checks the structural invariants and, when a tree is given, that the
    /// target resolves and is compatible with the action kind.
    pub fn validate(&self, tree: Option<&WidgetTree>) -> Result<(), UiError> {
        if self.kind.needs_target() && self.target.is_none() {
            return Err(UiError::InvalidAction(format!("{} requires a target", self.kind)));
        }
        if self.kind.forbids_target() && self.target.is_some() {
            return Err(UiError::InvalidAction(format!("{} takes no target", self.kind)));
        }
        let data_ok = match (self.kind, &self.data) {
            (ActionKind::Swipe, Some(ActionData::Direction(_))) => true,
            (ActionKind::Press, Some(ActionData::Key(_))) => true,
            (ActionKind::InputText, None | Some(ActionData::Text(_))) => true,
            (ActionKind::Click | ActionKind::LongClick | ActionKind::Rotate, None) => true,
            _ => false,
        };
        if !data_ok {
            return Err(UiError::InvalidAction(format!("payload does not fit {}", self.kind)));
        }
        if let (Some(tree), Some(target)) = (tree, self.target) {
            let widget = tree.find(target).ok_or(UiError::UnresolvedTarget(target))?;
            if self.kind == ActionKind::InputText && !widget.flags.editable {
                return Err(UiError::InvalidAction(format!(
                    "InputText target {target} is not editable"
                )));
            }
        }
        Ok(())
    }

    /// Natural-language description, e.g. `input "test2" in widget <EditText android:text="Enter Name"/>`.
    pub fn describe(&self, tree: &WidgetTree) -> String {
        let widget = || match self.target.and_then(|id| tree.find(id)) {
            Some(w) => format!("widget {}", render_widget(w)),
            None => match self.target {
                Some(id) => format!("widget {id}"),
                None => "the screen".to_owned(),
            },
        };
        match self.kind {
            ActionKind::Click => format!("click {}", widget()),
            ActionKind::LongClick => format!("long-click {}", widget()),
            ActionKind::InputText => match self.input_payload() {
                Some(text) => format!("input \"{text}\" in {}", widget()),
                None => format!("input text in {}", widget()),
            },
            ActionKind::Swipe => {
                let dir = self.direction().map(SwipeDirection::as_str).unwrap_or("?");
                match self.target {
                    Some(_) => format!("swipe {dir} on {}", widget()),
                    None => format!("swipe {dir}"),
                }
            }
            ActionKind::Rotate => "rotate the screen".to_owned(),
            ActionKind::Press => {
                let key = self.key().map(PressKey::as_str).unwrap_or("?");
                format!("press the {key} key")
            }
        }
    }
}

/// Enumerates the executable actions of a state.
///
/// Order: pre-order widget traversal, per widget Click < LongClick <
/// InputText < Swipe(up, down, left, right); then untargeted Swipes (only if
/// some widget scrolls), Rotate, and Press for Back, Enter, Delete, Home.
pub fn derive_actions(state: &UIState) -> Vec<UIAction> {
    derive_tree_actions(&state.hierarchy)
}

pub fn derive_tree_actions(tree: &WidgetTree) -> Vec<UIAction> {
    let mut actions = Vec::new();
    let mut any_scrollable = false;
    for widget in tree.iter() {
        any_scrollable |= widget.flags.scrollable;
        push_widget_actions(widget, &mut actions);
    }
    if any_scrollable {
        actions.extend(SwipeDirection::ALL.iter().map(|&d| UIAction::swipe(None, d)));
    }
    actions.push(UIAction::rotate());
    actions.extend(PressKey::ALL.iter().map(|&k| UIAction::press(k)));
    actions
}

fn push_widget_actions(widget: &Widget, actions: &mut Vec<UIAction>) {
    let flags = &widget.flags;
    let id = widget.node_id;
    if flags.interactive() {
        if flags.clickable {
            actions.push(UIAction::click(id));
        }
        if flags.long_clickable {
            actions.push(UIAction::long_click(id));
        }
        if flags.editable {
            actions.push(UIAction::input_text(id));
        }
    }
    if flags.scrollable {
        actions.extend(SwipeDirection::ALL.iter().map(|&d| UIAction::swipe(Some(id), d)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ui::parse_view_hierarchy;

    fn labels(xml: &str) -> Vec<String> {
        let tree = parse_view_hierarchy(xml).unwrap();
        derive_tree_actions(&tree)
            .iter()
            .map(|a| match a.target {
                Some(t) => format!("{}@{}", a.label(), t.0),
                None => a.label(),
            })
            .collect()
    }

    #[test]
    fn button_and_edit_text() {
        let got = labels(
            r#"<node class="LinearLayout">
                 <node class="Button" text="OK" clickable="true"/>
                 <node class="EditText" editable="true"/>
               </node>"#,
        );
        assert_eq!(
            got,
            vec![
                "Click@1",
                "InputText@2",
                "Rotate",
                "Press(Back)",
                "Press(Enter)",
                "Press(Delete)",
                "Press(Home)"
            ]
        );
    }

    #[test]
    fn inert_hierarchy_yields_globals() {
        let got = labels(r#"<node class="FrameLayout"><node class="TextView" text="hi"/></node>"#);
        assert_eq!(
            got,
            vec!["Rotate", "Press(Back)", "Press(Enter)", "Press(Delete)", "Press(Home)"]
        );
    }

    #[test]
    fn scrollable_list_of_rows() {
        // Hand enumeration: list (n1) comes first in pre-order and only
        // scrolls; rows n2..n4 click; then global swipes and the rest.
        let got = labels(
            r#"<node class="FrameLayout">
                 <node class="ListView" scrollable="true">
                   <node class="TextView" text="a" clickable="true"/>
                   <node class="TextView" text="b" clickable="true"/>
                   <node class="TextView" text="c" clickable="true"/>
                 </node>
               </node>"#,
        );
        let expected = vec![
            "Swipe(up)@1",
            "Swipe(down)@1",
            "Swipe(left)@1",
            "Swipe(right)@1",
            "Click@2",
            "Click@3",
            "Click@4",
            "Swipe(up)",
            "Swipe(down)",
            "Swipe(left)",
            "Swipe(right)",
            "Rotate",
            "Press(Back)",
            "Press(Enter)",
            "Press(Delete)",
            "Press(Home)",
        ];
        assert_eq!(got, expected);
    }

    #[test]
    fn disabled_or_hidden_widgets_get_no_targeted_actions() {
        let got = labels(
            r#"<node class="FrameLayout">
                 <node class="Button" clickable="true" enabled="false"/>
                 <node class="Button" long-clickable="true" visible="false"/>
                 <node class="EditText" editable="true" enabled="false"/>
               </node>"#,
        );
        assert_eq!(got.len(), 5);
    }

    #[test]
    fn long_click_only_when_declared() {
        let got = labels(r#"<node class="Button" clickable="true"/>"#);
        assert!(!got.iter().any(|l| l.starts_with("LongClick")));
    }

    #[test]
    fn describe_matches_prompt_style() {
        let tree = parse_view_hierarchy(
            r#"<node class="FrameLayout"><node class="EditText" text="Enter Name" editable="true"/></node>"#,
        )
        .unwrap();
        let action = UIAction::input(NodeId(1), "test2");
        assert_eq!(
            action.describe(&tree),
            r#"input "test2" in widget <EditText android:text="Enter Name"/>"#
        );
        assert_eq!(UIAction::press(PressKey::Back).describe(&tree), "press the Back key");
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        let tree = parse_view_hierarchy(
            r#"<node class="FrameLayout"><node class="Button" clickable="true"/></node>"#,
        )
        .unwrap();
        let no_target = UIAction { kind: ActionKind::Click, target: None, data: None };
        assert!(no_target.validate(None).is_err());
        let rotate_target = UIAction { kind: ActionKind::Rotate, target: Some(NodeId(1)), data: None };
        assert!(rotate_target.validate(None).is_err());
        assert!(matches!(
            UIAction::input(NodeId(1), "x").validate(Some(&tree)),
            Err(UiError::InvalidAction(_))
        ));
        assert_eq!(
            UIAction::click(NodeId(9)).validate(Some(&tree)),
            Err(UiError::UnresolvedTarget(NodeId(9)))
        );
    }

    #[test]
    fn serde_shape() {
        let json = serde_json::to_string(&UIAction::swipe(Some(NodeId(3)), SwipeDirection::Down)).unwrap();
        assert_eq!(json, r#"{"kind":"Swipe","target":3,"data":{"direction":"down"}}"#);
        let back: UIAction = serde_json::from_str(r#"{"kind":"Press","data":{"key":"Back"}}"#).unwrap();
        assert_eq!(back, UIAction::press(PressKey::Back));
    }
}
