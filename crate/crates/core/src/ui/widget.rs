//! Widget trees parsed from view-hierarchy XML.
//!
//! The accepted dialect is the uiautomator-style `node` element with the
//! attributes `class`, `text`, `content-desc`, `resource-id`,
//! `bounds="[l,t][r,b]"` and the boolean flags `clickable`,
//! `long-clickable`, `editable`, `scrollable`, `enabled`, `visible`.
//! Absent flags are `false`, except `enabled` and `visible` which default
//! to `true`. Empty text attributes are treated as absent.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::UiError;

/// Identifier of a widget within one hierarchy: its pre-order position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    pub left: i32,
    pub top: i32,
    pub right: i32,
    pub bottom: i32,
}

impl Bounds {
    fn parse(raw: &str) -> Option<Bounds> {
        // "[l,t][r,b]"
        let inner = raw.trim().strip_prefix('[')?.strip_suffix(']')?;
        let (first, second) = inner.split_once("][")?;
        let (l, t) = first.split_once(',')?;
        let (r, b) = second.split_once(',')?;
        let bounds = Bounds {
            left: l.trim().parse().ok()?,
            top: t.trim().parse().ok()?,
            right: r.trim().parse().ok()?,
            bottom: b.trim().parse().ok()?,
        };
        (bounds.left <= bounds.right && bounds.top <= bounds.bottom).then_some(bounds)
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}][{},{}]", self.left, self.top, self.right, self.bottom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WidgetFlags {
    pub clickable: bool,
    pub long_clickable: bool,
    pub editable: bool,
    pub scrollable: bool,
    pub enabled: bool,
    pub visible: bool,
}

impl Default for WidgetFlags {
    fn default() -> Self {
        WidgetFlags {
            clickable: false,
            long_clickable: false,
            editable: false,
            scrollable: false,
            enabled: true,
            visible: true,
        }
    }
}

impl WidgetFlags {
    /// Enabled and visible, i.e. the widget can receive targeted input.
    pub fn interactive(&self) -> bool {
        self.enabled && self.visible
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Widget {
    pub node_id: NodeId,
    pub class_name: String,
    pub text: Option<String>,
    pub content_desc: Option<String>,
    pub resource_id: Option<String>,
    pub bounds: Bounds,
    pub flags: WidgetFlags,
    pub children: Vec<Widget>,
}

impl Widget {
    /// Class name without its package prefix (`android.widget.Button` -> `Button`).
    pub fn short_class(&self) -> &str {
        self.class_name.rsplit('.').next().unwrap_or(&self.class_name)
    }

    /// Pre-order traversal starting at this widget.
    pub fn iter(&self) -> PreOrder<'_> {
        PreOrder { stack: vec![self] }
    }
}

pub struct PreOrder<'a> {
    stack: Vec<&'a Widget>,
}

impl<'a> Iterator for PreOrder<'a> {
    type Item = &'a Widget;

    fn next(&mut self) -> Option<&'a Widget> {
        let widget = self.stack.pop()?;
        self.stack.extend(widget.children.iter().rev());
        Some(widget)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WidgetTree {
    pub root: Widget,
    pub widget_count: usize,
}

impl WidgetTree {
    pub fn iter(&self) -> PreOrder<'_> {
        self.root.iter()
    }

    pub fn find(&self, id: NodeId) -> Option<&Widget> {
        self.iter().find(|w| w.node_id == id)
    }

    /// Serializes back into the `node` dialect accepted by
    /// [`parse_view_hierarchy`]. Node ids are implied by position.
    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        write_node(&mut out, &self.root, 0);
        out
    }
}

fn write_node(out: &mut String, widget: &Widget, depth: usize) {
    let indent = "  ".repeat(depth);
    let _ = write!(out, "{indent}<node class=\"{}\"", escape_attr(&widget.class_name));
    for (name, value) in [
        ("text", &widget.text),
        ("content-desc", &widget.content_desc),
        ("resource-id", &widget.resource_id),
    ] {
        if let Some(value) = value {
            let _ = write!(out, " {name}=\"{}\"", escape_attr(value));
        }
    }
    let _ = write!(out, " bounds=\"{}\"", widget.bounds);
    let flags = &widget.flags;
    for (name, value) in [
        ("clickable", flags.clickable),
        ("long-clickable", flags.long_clickable),
        ("editable", flags.editable),
        ("scrollable", flags.scrollable),
        ("enabled", flags.enabled),
        ("visible", flags.visible),
    ] {
        let _ = write!(out, " {name}=\"{value}\"");
    }
    if widget.children.is_empty() {
        out.push_str("/>\n");
    } else {
        out.push_str(">\n");
        for child in &widget.children {
            write_node(out, child, depth + 1);
        }
        let _ = writeln!(out, "{indent}</node>");
    }
}

pub(crate) fn escape_attr(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            _ => out.push(c),
        }
    }
    out
}

/// Parses a view hierarchy into a [`WidgetTree`] mirroring element nesting.
pub fn parse_view_hierarchy(xml_text: &str) -> Result<WidgetTree, UiError> {
    let doc = match roxmltree::Document::parse(xml_text) {
        Ok(doc) => doc,
        Err(_) if !has_element_start(xml_text) => return Err(UiError::EmptyDocument),
        Err(roxmltree::Error::NoRootNode) => {
            return Err(UiError::MalformedXml("unterminated root element".into()))
        }
        Err(e) => return Err(UiError::MalformedXml(e.to_string())),
    };
    let mut next_id = 0u32;
    let root = convert(doc.root_element(), &mut next_id)?;
    Ok(WidgetTree {
        root,
        widget_count: next_id as usize,
    })
}

fn has_element_start(text: &str) -> bool {
    text.as_bytes()
        .windows(2)
        .any(|w| w[0] == b'<' && (w[1].is_ascii_alphabetic() || w[1] == b'_'))
}

fn convert(node: roxmltree::Node<'_, '_>, next_id: &mut u32) -> Result<Widget, UiError> {
    let node_id = NodeId(*next_id);
    *next_id += 1;

    let text_attr = |name: &str| {
        node.attribute(name)
            .filter(|v| !v.is_empty())
            .map(str::to_owned)
    };
    let flag = |name: &str, default: bool| {
        node.attribute(name)
            .map(|v| v.trim().eq_ignore_ascii_case("true"))
            .unwrap_or(default)
    };
    let bounds = match node.attribute("bounds") {
        None => Bounds::default(),
        Some(raw) => Bounds::parse(raw).ok_or_else(|| {
            UiError::MalformedXml(format!("invalid bounds {raw:?} on node {node_id}"))
        })?,
    };

    let mut widget = Widget {
        node_id,
        class_name: text_attr("class").unwrap_or_else(|| "View".to_owned()),
        text: text_attr("text"),
        content_desc: text_attr("content-desc"),
        resource_id: text_attr("resource-id"),
        bounds,
        flags: WidgetFlags {
            clickable: flag("clickable", false),
            long_clickable: flag("long-clickable", false),
            editable: flag("editable", false),
            scrollable: flag("scrollable", false),
            enabled: flag("enabled", true),
            visible: flag("visible", true),
        },
        children: Vec::new(),
    };
    for child in node.children().filter(|c| c.is_element()) {
        widget.children.push(convert(child, next_id)?);
    }
    Ok(widget)
}
