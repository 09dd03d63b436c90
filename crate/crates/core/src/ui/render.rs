//! Compact textual renderings used inside prompts.

use std::fmt::Write as _;

use super::action::UIAction;
use super::widget::{escape_attr, NodeId, Widget};
use super::{UIState, UiError};

/// Label of the line that carries untargeted actions in a widget list.
pub const DEVICE_LINE: &str = "(device)";

/// Renders a widget as one self-closing element: `<EditText android:text="Enter Name"/>`.
pub fn render_widget(widget: &Widget) -> String {
    let mut out = format!("<{}", widget.short_class());
    for (name, value) in [
        ("android:text", &widget.text),
        ("android:content-desc", &widget.content_desc),
        ("android:resource-id", &widget.resource_id),
    ] {
        if let Some(value) = value.as_deref().filter(|v| !v.is_empty()) {
            let _ = write!(out, " {name}=\"{}\"", escape_attr(value));
        }
    }
    out.push_str("/>");
    out
}

/// One line per actionable widget, in order of first appearance in `actions`,
/// followed by the indexed action labels available on it:
///
/// ```text
/// <TextView android:text="Alarms"/> | #0 Click
/// (device) | #1 Rotate, #2 Press(Back)
/// ```
///
/// Untargeted actions share the trailing `(device)` line.
pub fn render_widget_list(state: &UIState, actions: &[UIAction]) -> Result<String, UiError> {
    let mut groups: Vec<(Option<NodeId>, Vec<String>)> = Vec::new();
    let mut device = Vec::new();
    for (index, action) in actions.iter().enumerate() {
        let tag = format!("#{index} {}", action.label());
        match action.target {
            None => device.push(tag),
            Some(id) => {
                state.hierarchy.find(id).ok_or(UiError::UnresolvedTarget(id))?;
                match groups.iter_mut().find(|(gid, _)| *gid == Some(id)) {
                    Some((_, tags)) => tags.push(tag),
                    None => groups.push((Some(id), vec![tag])),
                }
            }
        }
    }
    let mut out = String::new();
    for (id, tags) in &groups {
        let widget = id.and_then(|id| state.hierarchy.find(id)).expect("resolved above");
        let _ = writeln!(out, "{} | {}", render_widget(widget), tags.join(", "));
    }
    if !device.is_empty() {
        let _ = writeln!(out, "{DEVICE_LINE} | {}", device.join(", "));
    }
    Ok(out)
}

/// Textual stand-in for a screen capture: activity, visual descriptor and
/// the widgets that carry semantics or accept input.
pub fn render_state(state: &UIState) -> String {
    let mut out = format!(
        "Activity: {}\nScreen: {}\nWidgets:\n",
        state.activity_name,
        state.visual_descriptor.replace('\n', " ")
    );
    for widget in state.hierarchy.iter() {
        let f = &widget.flags;
        let semantic = widget.text.is_some() || widget.content_desc.is_some();
        let actionable = f.interactive() && (f.clickable || f.long_clickable || f.editable || f.scrollable);
        if f.visible && (semantic || actionable) {
            let _ = writeln!(out, "  {}", render_widget(widget));
        }
    }
    out
}
