//! Declarative app models for the simulated backend.
//!
//! An app model is a JSON document (`schema: 1`):
//!
//! ```json
//! {
//!   "schema": 1,
//!   "app_name": "amaze-mini",
//!   "initial_state": "root",
//!   "states": { "root": { "activity": "MainActivity", "hierarchy_xml": "<node .../>", "visual": "..." } },
//!   "rules": [ { "from": "root", "on": { "kind": "Click", "target_text": "Alarms" }, "to": "alarms" } ],
//!   "bugs": [ { "id": "paste-into-self", "kind": "Crash", "trigger": "crashed", "crash_log": "..." } ],
//!   "ground_truth": { "bug": "paste-into-self", "path": [ { "kind": "Click", "target_text": "Alarms" } ] }
//! }
//! ```
//!
//! Matchers (`on`) accept `kind` plus optional `target_resource_id`,
//! `target_text`, `target_node` (pre-order index), `input_pattern` (regex
//! over the InputText payload), `direction`, `key` and `when` (variable
//! equalities). Effects are `{"set": var, "value": v}` or
//! `{"incr": var, "by": n}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use regex::Regex;
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::ui::{
    parse_view_hierarchy, ActionKind, NodeId, PressKey, SwipeDirection, UIAction, Widget, WidgetTree,
};

use super::DeviceError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read app model {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("app model schema violation: {0}")]
    SchemaViolation(String),
    #[error("{context} references unknown state `{key}`")]
    DanglingStateKey { context: String, key: String },
    #[error("state `{0}` is declared more than once")]
    DuplicateStateKey(String),
}

/// Value held in the simulator's variable store.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VarValue {
    Int(i64),
    Text(String),
}

impl fmt::Display for VarValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarValue::Int(v) => write!(f, "{v}"),
            VarValue::Text(v) => f.write_str(v),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub state_key: String,
    pub activity_name: String,
    pub hierarchy_xml: String,
    pub hierarchy: Arc<WidgetTree>,
    pub visual_descriptor: String,
}

/// Selects a widget by resource id, text and/or pre-order index. Every
/// field that is set must match.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TargetSelector {
    pub resource_id: Option<String>,
    pub text: Option<String>,
    pub node: Option<u32>,
}

impl TargetSelector {
    pub fn is_empty(&self) -> bool {
        self.resource_id.is_none() && self.text.is_none() && self.node.is_none()
    }

    pub fn matches(&self, widget: &Widget) -> bool {
        self.resource_id.as_deref().is_none_or(|r| widget.resource_id.as_deref() == Some(r))
            && self.text.as_deref().is_none_or(|t| widget.text.as_deref() == Some(t))
            && self.node.is_none_or(|n| widget.node_id == NodeId(n))
    }
}

#[derive(Clone, Debug)]
pub struct ActionMatcher {
    pub kind: ActionKind,
    pub target: TargetSelector,
    pub input_pattern: Option<Regex>,
    pub direction: Option<SwipeDirection>,
    pub key: Option<PressKey>,
    pub when: BTreeMap<String, VarValue>,
}

impl ActionMatcher {
    pub fn matches(
        &self,
        action: &UIAction,
        widget: Option<&Widget>,
        vars: &BTreeMap<String, VarValue>,
    ) -> bool {
        if action.kind != self.kind {
            return false;
        }
        if !self.target.is_empty() && !widget.is_some_and(|w| self.target.matches(w)) {
            return false;
        }
        if let Some(pattern) = &self.input_pattern {
            if !action.input_payload().is_some_and(|p| pattern.is_match(p)) {
                return false;
            }
        }
        if self.direction.is_some() && action.direction() != self.direction {
            return false;
        }
        if self.key.is_some() && action.key() != self.key {
            return false;
        }
        self.when.iter().all(|(k, v)| vars.get(k) == Some(v))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Effect {
    Set { var: String, value: VarValue },
    Increment { var: String, by: i64 },
}

impl Effect {
    fn apply(&self, vars: &mut BTreeMap<String, VarValue>) {
        match self {
            Effect::Set { var, value } => {
                vars.insert(var.clone(), value.clone());
            }
            Effect::Increment { var, by } => {
                let current = match vars.get(var) {
                    Some(VarValue::Int(v)) => *v,
                    _ => 0,
                };
                vars.insert(var.clone(), VarValue::Int(current + by));
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimRule {
    pub source: String,
    pub matcher: ActionMatcher,
    pub destination: String,
    pub effects: Vec<Effect>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BugKind {
    Crash,
    NonCrash,
}

#[derive(Clone, Debug)]
pub struct SimBug {
    pub bug_id: String,
    pub kind: BugKind,
    pub trigger: String,
    pub crash_log_text: Option<String>,
    pub symptom_descriptor: Option<String>,
}

/// Action description resolved against whatever screen is current.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionPattern {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_resource_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_node: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<SwipeDirection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<PressKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl ActionPattern {
    pub fn selector(&self) -> TargetSelector {
        TargetSelector {
            resource_id: self.target_resource_id.clone(),
            text: self.target_text.clone(),
            node: self.target_node,
        }
    }

    /// First widget (pre-order) matching the selector that supports the kind.
    pub fn resolve(&self, tree: &WidgetTree) -> Option<UIAction> {
        let selector = self.selector();
        let target = if selector.is_empty() {
            None
        } else {
            let widget = tree.iter().find(|w| {
                let f = &w.flags;
                selector.matches(w)
                    && match self.kind {
                        ActionKind::Click => f.interactive() && f.clickable,
                        ActionKind::LongClick => f.interactive() && f.long_clickable,
                        ActionKind::InputText => f.interactive() && f.editable,
                        ActionKind::Swipe => f.scrollable,
                        ActionKind::Rotate | ActionKind::Press => false,
                    }
            })?;
            Some(widget.node_id)
        };
        let action = match self.kind {
            ActionKind::Click => UIAction::click(target?),
            ActionKind::LongClick => UIAction::long_click(target?),
            ActionKind::InputText => UIAction::input(target?, self.text.clone().unwrap_or_else(|| "test".into())),
            ActionKind::Swipe => UIAction::swipe(target, self.direction?),
            ActionKind::Rotate => UIAction::rotate(),
            ActionKind::Press => UIAction::press(self.key?),
        };
        Some(action)
    }
}

#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub bug_id: String,
    pub path: Vec<ActionPattern>,
}

/// Position of the simulator: current state plus variable store.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimConfig {
    pub state: String,
    pub vars: BTreeMap<String, VarValue>,
}

#[derive(Clone, Debug)]
pub struct SimApp {
    pub app_name: String,
    pub states: BTreeMap<String, SimState>,
    pub initial_state: String,
    pub rules: Vec<SimRule>,
    pub bugs: Vec<SimBug>,
    pub ground_truth: Option<GroundTruth>,
}

impl SimApp {
    pub fn load(path: impl AsRef<Path>) -> Result<SimApp, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        SimApp::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<SimApp, ModelError> {
        let file: AppModelFile =
            serde_json::from_str(text).map_err(|e| ModelError::SchemaViolation(e.to_string()))?;
        file.compile()
    }

    pub fn initial_config(&self) -> SimConfig {
        SimConfig { state: self.initial_state.clone(), vars: BTreeMap::new() }
    }

    pub fn state(&self, key: &str) -> &SimState {
        &self.states[key]
    }

    pub fn bug(&self, bug_id: &str) -> Option<&SimBug> {
        self.bugs.iter().find(|b| b.bug_id == bug_id)
    }

    pub fn crash_bug_at(&self, state_key: &str) -> Option<&SimBug> {
        self.bugs.iter().find(|b| b.kind == BugKind::Crash && b.trigger == state_key)
    }

    /// Applies the first matching rule. No match leaves the position unchanged.
    pub fn step(&self, config: &SimConfig, action: &UIAction) -> Result<SimConfig, DeviceError> {
        let tree = &self.state(&config.state).hierarchy;
        let widget = match action.target {
            Some(id) => Some(tree.find(id).ok_or(DeviceError::UnresolvedTarget(id))?),
            None => None,
        };
        action
            .validate(Some(tree))
            .map_err(|e| DeviceError::InvalidAction(e.to_string()))?;
        let rule = self
            .rules
            .iter()
            .filter(|r| r.source == config.state)
            .find(|r| r.matcher.matches(action, widget, &config.vars));
        let Some(rule) = rule else {
            return Ok(config.clone());
        };
        let mut next = SimConfig { state: rule.destination.clone(), vars: config.vars.clone() };
        for effect in &rule.effects {
            effect.apply(&mut next.vars);
        }
        Ok(next)
    }

    /// Candidate InputText payloads for exhaustive search: `"test"` plus the
    /// literal of every `^literal$` input pattern.
    pub fn input_vocabulary(&self) -> Vec<String> {
        let mut words = BTreeSet::from(["test".to_owned()]);
        for rule in &self.rules {
            if let Some(lit) = rule.matcher.input_pattern.as_ref().and_then(|p| literal_of(p.as_str())) {
                words.insert(lit);
            }
        }
        words.into_iter().collect()
    }
}

fn literal_of(pattern: &str) -> Option<String> {
    let inner = pattern.strip_prefix('^')?.strip_suffix('$')?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                let escaped = chars.next()?;
                if escaped.is_alphanumeric() {
                    return None;
                }
                out.push(escaped);
            }
            '.' | '*' | '+' | '?' | '(' | ')' | '[' | ']' | '{' | '}' | '|' | '^' | '$' => return None,
            _ => out.push(c),
        }
    }
    Some(out)
}

// ---- file schema ---------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AppModelFile {
    schema: u32,
    app_name: String,
    initial_state: String,
    states: OrderedEntries<StateEntry>,
    #[serde(default)]
    rules: Vec<RuleEntry>,
    #[serde(default)]
    bugs: Vec<BugEntry>,
    #[serde(default)]
    ground_truth: Option<GroundTruthEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateEntry {
    activity: String,
    hierarchy_xml: String,
    #[serde(default)]
    visual: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    from: String,
    on: MatcherEntry,
    to: String,
    #[serde(default)]
    effects: Vec<EffectEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatcherEntry {
    kind: ActionKind,
    #[serde(default)]
    target_resource_id: Option<String>,
    #[serde(default)]
    target_text: Option<String>,
    #[serde(default)]
    target_node: Option<u32>,
    #[serde(default)]
    input_pattern: Option<String>,
    #[serde(default)]
    direction: Option<SwipeDirection>,
    #[serde(default)]
    key: Option<PressKey>,
    #[serde(default)]
    when: BTreeMap<String, VarValue>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EffectEntry {
    Set { set: String, value: VarValue },
    Incr {
        incr: String,
        #[serde(default = "one")]
        by: i64,
    },
}

fn one() -> i64 {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BugEntry {
    id: String,
    kind: BugKind,
    trigger: String,
    #[serde(default)]
    crash_log: Option<String>,
    #[serde(default)]
    symptom: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthEntry {
    bug: String,
    path: Vec<ActionPattern>,
}

/// JSON object kept as an ordered list so duplicate keys are detectable.
struct OrderedEntries<T>(Vec<(String, T)>);

impl<'de, T: Deserialize<'de>> Deserialize<'de> for OrderedEntries<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Deserialize<'de>> Visitor<'de> for EntriesVisitor<T> {
            type Value = OrderedEntries<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of state keys to states")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, T>()? {
                    entries.push((k, v));
                }
                Ok(OrderedEntries(entries))
            }
        }

        deserializer.deserialize_map(EntriesVisitor(std::marker::PhantomData))
    }
}

impl AppModelFile {
    fn compile(self) -> Result<SimApp, ModelError> {
        if self.schema != SCHEMA_VERSION {
            return Err(ModelError::SchemaViolation(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        let mut states = BTreeMap::new();
        for (key, entry) in self.states.0 {
            if states.contains_key(&key) {
                return Err(ModelError::DuplicateStateKey(key));
            }
            let hierarchy = parse_view_hierarchy(&entry.hierarchy_xml).map_err(|e| {
                ModelError::SchemaViolation(format!("states.{key}.hierarchy_xml: {e}"))
            })?;
            states.insert(
                key.clone(),
                SimState {
                    state_key: key,
                    activity_name: entry.activity,
                    hierarchy_xml: entry.hierarchy_xml,
                    hierarchy: Arc::new(hierarchy),
                    visual_descriptor: entry.visual,
                },
            );
        }
        let known = |context: String, key: &str| {
            if states.contains_key(key) {
                Ok(())
            } else {
                Err(ModelError::DanglingStateKey { context, key: key.to_owned() })
            }
        };
        known("initial_state".into(), &self.initial_state)?;

        let mut rules = Vec::with_capacity(self.rules.len());
        for (i, rule) in self.rules.into_iter().enumerate() {
            known(format!("rules[{i}].from"), &rule.from)?;
            known(format!("rules[{i}].to"), &rule.to)?;
            let input_pattern = rule
                .on
                .input_pattern
                .map(|p| {
                    Regex::new(&p).map_err(|e| {
                        ModelError::SchemaViolation(format!("rules[{i}].on.input_pattern: {e}"))
                    })
                })
                .transpose()?;
            rules.push(SimRule {
                source: rule.from,
                matcher: ActionMatcher {
                    kind: rule.on.kind,
                    target: TargetSelector {
                        resource_id: rule.on.target_resource_id,
                        text: rule.on.target_text,
                        node: rule.on.target_node,
                    },
                    input_pattern,
                    direction: rule.on.direction,
                    key: rule.on.key,
                    when: rule.on.when,
                },
                destination: rule.to,
                effects: rule
                    .effects
                    .into_iter()
                    .map(|e| match e {
                        EffectEntry::Set { set, value } => Effect::Set { var: set, value },
                        EffectEntry::Incr { incr, by } => Effect::Increment { var: incr, by },
                    })
                    .collect(),
            });
        }

        let mut bugs: Vec<SimBug> = Vec::with_capacity(self.bugs.len());
        for (i, bug) in self.bugs.into_iter().enumerate() {
            known(format!("bugs[{i}].trigger"), &bug.trigger)?;
            if bugs.iter().any(|b| b.bug_id == bug.id) {
                return Err(ModelError::SchemaViolation(format!("bugs[{i}]: duplicate id `{}`", bug.id)));
            }
            match (bug.kind, &bug.crash_log, &bug.symptom) {
                (BugKind::Crash, Some(_), None) | (BugKind::NonCrash, None, Some(_)) => {}
                (BugKind::Crash, _, _) => {
                    return Err(ModelError::SchemaViolation(format!(
                        "bugs[{i}]: Crash bugs need `crash_log` and no `symptom`"
                    )))
                }
                (BugKind::NonCrash, _, _) => {
                    return Err(ModelError::SchemaViolation(format!(
                        "bugs[{i}]: NonCrash bugs need `symptom` and no `crash_log`"
                    )))
                }
            }
            bugs.push(SimBug {
                bug_id: bug.id,
                kind: bug.kind,
                trigger: bug.trigger,
                crash_log_text: bug.crash_log,
                symptom_descriptor: bug.symptom,
            });
        }

        let ground_truth = match self.ground_truth {
            None => None,
            Some(gt) => {
                if !bugs.iter().any(|b| b.bug_id == gt.bug) {
                    return Err(ModelError::SchemaViolation(format!(
                        "ground_truth.bug `{}` is not a declared bug",
                        gt.bug
                    )));
                }
                Some(GroundTruth { bug_id: gt.bug, path: gt.path })
            }
        };

        Ok(SimApp {
            app_name: self.app_name,
            states,
            initial_state: self.initial_state,
            rules,
            bugs,
            ground_truth,
        })
    }
}
