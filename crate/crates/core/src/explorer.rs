//! Pre-exploration of UI actions: enumerate, filter, probe each retained
//! action under snapshot isolation and summarize what it did.

use serde::Deserialize;
use thiserror::Error;

use crate::device::{Device, DeviceError, SnapshotId};
use crate::gateway::{Attribute, Gateway, GatewayError, PromptContext, PromptRole};
use crate::report::ReproductionSpecification;
use crate::ui::{derive_actions, render_state, render_widget, render_widget_list, ActionKind, UIAction, UIState, UiError, Widget};

/// Payload used whenever input generation fails.
pub const FALLBACK_INPUT: &str = "test";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExplorerError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Ui(#[from] UiError),
}

/// One executed action with the screens around it.
#[derive(Clone, Debug)]
pub struct Transition {
    pub action: UIAction,
    pub action_rendered: String,
    pub before: UIState,
    /// Absent when the action crashed the app.
    pub after: Option<UIState>,
    pub crashed: bool,
    pub crash_record: Option<String>,
    pub summary: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathStatus {
    Active,
    Pruned,
    CandidateSuccess,
    ConfirmedSuccess,
}

#[derive(Clone, Debug)]
pub struct ExplorationPath {
    pub path_id: u64,
    pub transitions: Vec<Transition>,
    pub status: PathStatus,
}

impl ExplorationPath {
    pub fn root(path_id: u64) -> Self {
        ExplorationPath { path_id, transitions: Vec::new(), status: PathStatus::Active }
    }

    /// A new active path extending this one by `transition`.
    pub fn child(&self, path_id: u64, transition: Transition) -> Self {
        let mut transitions = self.transitions.clone();
        transitions.push(transition);
        ExplorationPath { path_id, transitions, status: PathStatus::Active }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn last(&self) -> Option<&Transition> {
        self.transitions.last()
    }

    /// A path whose last action crashed cannot be extended.
    pub fn is_terminal(&self) -> bool {
        self.last().is_some_and(|t| t.crashed)
    }

    pub fn actions(&self) -> Vec<UIAction> {
        self.transitions.iter().map(|t| t.action.clone()).collect()
    }

    pub fn summaries(&self) -> Vec<String> {
        self.transitions.iter().map(|t| t.summary.clone()).collect()
    }

    /// The `<path>` prompt attribute: `(1) summary` per transition.
    pub fn render(&self) -> String {
        if self.transitions.is_empty() {
            return "(no actions taken yet; the app was just launched)".to_owned();
        }
        render_summaries(&self.transitions, 1)
    }
}

pub(crate) fn render_summaries(transitions: &[Transition], first_number: usize) -> String {
    transitions
        .iter()
        .enumerate()
        .map(|(i, t)| format!("({}) {}", first_number + i, one_line(&t.summary)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Switches for the ablation variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreOptions {
    /// Ask the gateway to summarize transitions; otherwise the summary is
    /// the rendered action.
    pub summarize: bool,
    /// Probe only the first retained action.
    pub single_action: bool,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions { summarize: true, single_action: false }
    }
}

#[derive(Deserialize)]
struct KeepReply {
    keep: Vec<i64>,
}

#[derive(Deserialize)]
struct TextReply {
    text: String,
}

#[derive(Deserialize)]
struct SummaryReply {
    summary: String,
}

/// Asks the gateway which actions matter. The result keeps input order;
/// out-of-range indices are ignored and an empty or unusable selection
/// yields the full input.
pub fn filter_actions(
    actions: &[UIAction],
    state: &UIState,
    spec: &ReproductionSpecification,
    path: &ExplorationPath,
    gateway: &Gateway,
) -> Result<Vec<UIAction>, ExplorerError> {
    if actions.is_empty() {
        return Ok(Vec::new());
    }
    let ctx = PromptContext::new(PromptRole::ActionFilter)
        .with(Attribute::WidgetList, render_widget_list(state, actions)?.trim_end())
        .with(Attribute::ReproductionSpecification, spec.render())
        .with(Attribute::Path, path.render());
    let keep = match gateway.complete_structured::<KeepReply, _>(&ctx, |_| Ok(())) {
        Ok(reply) => reply.keep,
        Err(GatewayError::Unparseable { .. }) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    Ok(select(actions, &keep))
}

/// Order-preserving selection by index with the empty-selection fallback.
pub fn select(actions: &[UIAction], keep: &[i64]) -> Vec<UIAction> {
    let chosen: Vec<UIAction> = actions
        .iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(&(*i as i64)))
        .map(|(_, a)| a.clone())
        .collect();
    if chosen.is_empty() {
        actions.to_vec()
    } else {
        chosen
    }
}

/// Text to type into `widget`; never fails and never returns empty text.
pub fn generate_input_text(
    widget: &Widget,
    spec: &ReproductionSpecification,
    path: &ExplorationPath,
    gateway: &Gateway,
) -> String {
    let ctx = PromptContext::new(PromptRole::InputTextGen)
        .with(Attribute::Widget, render_widget(widget))
        .with(Attribute::ReproductionSpecification, spec.render())
        .with(Attribute::Path, path.render());
    gateway
        .complete_structured::<TextReply, _>(&ctx, |r| {
            if r.text.trim().is_empty() {
                Err("`text` is empty".into())
            } else {
                Ok(())
            }
        })
        .map(|r| r.text)
        .unwrap_or_else(|_| FALLBACK_INPUT.to_owned())
}

/// Summary of a crashing action; no model involved.
pub fn crash_summary(action_rendered: &str, crash_record: &str) -> String {
    format!("{action_rendered}; the app crashed with the following error log:\n{crash_record}")
}

pub fn summarize_transition(
    action: &UIAction,
    before: &UIState,
    after: Option<&UIState>,
    crash: Option<&str>,
    gateway: &Gateway,
) -> Result<String, ExplorerError> {
    let rendered = action.describe(&before.hierarchy);
    match (after, crash) {
        (_, Some(record)) => Ok(crash_summary(&rendered, record)),
        (Some(after), None) => {
            let ctx = PromptContext::new(PromptRole::TransitionSummary)
                .with(Attribute::Action, rendered)
                .with(Attribute::BeforeState, render_state(before))
                .with(Attribute::AfterState, render_state(after));
            let reply = gateway.complete_structured::<SummaryReply, _>(&ctx, |r| {
                if r.summary.trim().is_empty() {
                    Err("`summary` is empty".into())
                } else {
                    Ok(())
                }
            })?;
            Ok(reply.summary.trim().to_owned())
        }
        (None, None) => Err(UiError::InvalidAction("a transition needs an after state or a crash".into()).into()),
    }
}

/// A probed action plus, on request, a snapshot of the device right after it.
#[derive(Clone, Debug)]
pub struct Probe {
    pub transition: Transition,
    pub end_snapshot: Option<SnapshotId>,
}

/// One pre-exploration round: derive, filter, then for every retained action capture,
/// execute, capture, summarize and roll back. The device ends where it
/// started.
pub fn pre_explore<D: Device>(
    state: &UIState,
    spec: &ReproductionSpecification,
    path: &ExplorationPath,
    device: &mut D,
    gateway: &Gateway,
) -> Result<Vec<Transition>, ExplorerError> {
    let probes = pre_explore_with(state, spec, path, device, gateway, ExploreOptions::default(), false)?;
    Ok(probes.into_iter().map(|p| p.transition).collect())
}

/// [`pre_explore`] with ablation switches. With `keep_end_snapshots`, every
/// non-crashing probe carries a snapshot of its end state; the caller owns
/// and releases those.
pub fn pre_explore_with<D: Device>(
    state: &UIState,
    spec: &ReproductionSpecification,
    path: &ExplorationPath,
    device: &mut D,
    gateway: &Gateway,
    options: ExploreOptions,
    keep_end_snapshots: bool,
) -> Result<Vec<Probe>, ExplorerError> {
    let actions = derive_actions(state);
    let mut retained = filter_actions(&actions, state, spec, path, gateway)?;
    if options.single_action {
        retained.truncate(1);
    }

    let start = device.snapshot()?;
    let mut executed = Vec::with_capacity(retained.len());
    let mut taken = Vec::new();
    let outcome = probe_all(state, spec, path, device, gateway, &retained, start, keep_end_snapshots, &mut executed);
    for probe in &executed {
        if let Some(id) = probe.end_snapshot {
            taken.push(id);
        }
    }
    device.release_snapshot(start);
    if let Err(e) = outcome {
        for id in taken {
            device.release_snapshot(id);
        }
        return Err(e);
    }

    if options.summarize {
        summarize_all(&mut executed, gateway)?;
    }
    Ok(executed)
}

#[allow(clippy::too_many_arguments)]
fn probe_all<D: Device>(
    state: &UIState,
    spec: &ReproductionSpecification,
    path: &ExplorationPath,
    device: &mut D,
    gateway: &Gateway,
    retained: &[UIAction],
    start: SnapshotId,
    keep_end_snapshots: bool,
    out: &mut Vec<Probe>,
) -> Result<(), ExplorerError> {
    for action in retained {
        let mut action = action.clone();
        if action.kind == ActionKind::InputText && action.input_payload().is_none() {
            if let Some(widget) = action.target.and_then(|id| state.hierarchy.find(id)) {
                let text = generate_input_text(widget, spec, path, gateway);
                action = UIAction::input(widget.node_id, text);
            }
        }
        let before = device.capture_screen()?;
        let step = device.execute(&action);
        let step = match step {
            Ok(step) => step,
            Err(e) => {
                let _ = device.rollback(start);
                return Err(e.into());
            }
        };
        let end_snapshot = if keep_end_snapshots && !step.crashed { Some(device.snapshot()?) } else { None };
        let after = if step.crashed { None } else { Some(device.capture_screen()?) };
        let action_rendered = action.describe(&before.hierarchy);
        let summary = match &step.crash_record {
            Some(record) => crash_summary(&action_rendered, record),
            None => action_rendered.clone(),
        };
        out.push(Probe {
            transition: Transition {
                action,
                action_rendered,
                before,
                after,
                crashed: step.crashed,
                crash_record: step.crash_record,
                summary,
            },
            end_snapshot,
        });
        device.rollback(start)?;
    }
    Ok(())
}

/// Replaces the placeholder summaries of non-crashing probes. Calls run
/// concurrently and are joined in probe order.
fn summarize_all(probes: &mut [Probe], gateway: &Gateway) -> Result<(), ExplorerError> {
    let pending: Vec<usize> = (0..probes.len()).filter(|&i| !probes[i].transition.crashed).collect();
    let results: Vec<Result<String, ExplorerError>> = if pending.len() <= 1 {
        pending.iter().map(|&i| summarize_probe(&probes[i].transition, gateway)).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = pending
                .iter()
                .map(|&i| {
                    let t = &probes[i].transition;
                    scope.spawn(move || summarize_probe(t, gateway))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("summary worker panicked")).collect()
        })
    };
    for (i, result) in pending.into_iter().zip(results) {
        probes[i].transition.summary = result?;
    }
    Ok(())
}

fn summarize_probe(t: &Transition, gateway: &Gateway) -> Result<String, ExplorerError> {
    summarize_transition(&t.action, &t.before, t.after.as_ref(), t.crash_record.as_deref(), gateway)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{SimApp, SimDevice};
    use crate::gateway::{MockBackend, PriceTable};
    use crate::ui::NodeId;
    use std::sync::Arc;

    const APP: &str = r#"{
        "schema": 1, "app_name": "probe", "initial_state": "home",
        "states": {
          "home": { "activity": "Main", "visual": "home",
                    "hierarchy_xml": "<node class=\"FrameLayout\"><node class=\"Button\" text=\"Go\" clickable=\"true\"/><node class=\"Button\" text=\"Boom\" clickable=\"true\"/><node class=\"EditText\" text=\"Enter Name\" editable=\"true\"/></node>" },
          "next": { "activity": "Next", "visual": "next screen", "hierarchy_xml": "<node class=\"FrameLayout\"/>" },
          "named": { "activity": "Main", "visual": "name accepted", "hierarchy_xml": "<node class=\"FrameLayout\"/>" },
          "dead": { "activity": "Main", "visual": "dead", "hierarchy_xml": "<node class=\"FrameLayout\"/>" }
        },
        "rules": [
          { "from": "home", "on": { "kind": "Click", "target_text": "Go" }, "to": "next" },
          { "from": "home", "on": { "kind": "Click", "target_text": "Boom" }, "to": "dead" },
          { "from": "home", "on": { "kind": "InputText", "input_pattern": "^test2$" }, "to": "named" }
        ],
        "bugs": [ { "id": "b", "kind": "Crash", "trigger": "dead", "crash_log": "java.lang.IllegalArgumentException: boom" } ]
    }"#;

    fn spec() -> ReproductionSpecification {
        ReproductionSpecification { steps: vec!["press Boom".into()], symptoms: vec!["crash".into()], expects_crash: true }
    }

    fn gateway(script: &str) -> Gateway {
        Gateway::new(MockBackend::from_json(script).unwrap(), PriceTable::default())
    }

    fn setup() -> (SimDevice, UIState) {
        let mut device = SimDevice::new(Arc::new(SimApp::from_json(APP).unwrap()));
        let state = device.reset().unwrap();
        (device, state)
    }

    #[test]
    fn select_keeps_order_and_drops_out_of_range() {
        let actions: Vec<UIAction> = (0..7).map(|i| UIAction::click(NodeId(i))).collect();
        assert_eq!(select(&actions, &[5, 99]), vec![actions[5].clone()]);
        assert_eq!(select(&actions, &[3, 1]), vec![actions[1].clone(), actions[3].clone()]);
        assert_eq!(select(&actions, &[]), actions);
        assert_eq!(select(&actions, &[-1, 7]), actions);
    }

    #[test]
    fn restores_device_and_records_crash() {
        let (mut device, state) = setup();
        let gw = gateway("[]");
        let transitions = pre_explore(&state, &spec(), &ExplorationPath::root(0), &mut device, &gw).unwrap();
        // Go, Boom, InputText, Rotate, 4 Presses
        assert_eq!(transitions.len(), 8);
        assert_eq!(device.capture_screen().unwrap().fingerprint(), state.fingerprint());
        let boom = &transitions[1];
        assert!(boom.crashed && boom.after.is_none());
        assert!(boom.summary.contains("java.lang.IllegalArgumentException: boom"));
        for t in &transitions {
            assert_eq!(t.before.fingerprint(), state.fingerprint());
        }
    }

    #[test]
    fn input_payload_generated_lazily() {
        let (mut device, state) = setup();
        let gw = gateway(
            r#"[{"role":"ActionFilter","respond":{"keep":[2]}},
                {"role":"InputTextGen","match":"Enter Name","respond":{"text":"test2"}}]"#,
        );
        let transitions = pre_explore(&state, &spec(), &ExplorationPath::root(0), &mut device, &gw).unwrap();
        assert_eq!(transitions.len(), 1);
        assert_eq!(transitions[0].action.input_payload(), Some("test2"));
        assert_eq!(transitions[0].after.as_ref().unwrap().visual_descriptor, "name accepted");
        assert_eq!(transitions[0].action_rendered, r#"input "test2" in widget <EditText android:text="Enter Name"/>"#);
    }

    #[test]
    fn input_falls_back_to_test() {
        let (_, state) = setup();
        let gw = gateway(r#"[{"role":"InputTextGen","respond":{"text":"  "}}]"#);
        let widget = state.hierarchy.find(NodeId(3)).unwrap();
        assert_eq!(generate_input_text(widget, &spec(), &ExplorationPath::root(0), &gw), "test");
    }

    #[test]
    fn summaries_come_from_gateway_in_order() {
        let (mut device, state) = setup();
        let gw = gateway(
            r####"[{"role":"ActionFilter","respond":{"keep":[0,3,4]}},
                {"role":"TransitionSummary","regex":"### Action\n(?P<a>[^\n]+)","respond":{"summary":"did ${a}"}}]"####,
        );
        let transitions = pre_explore(&state, &spec(), &ExplorationPath::root(0), &mut device, &gw).unwrap();
        let summaries: Vec<&str> = transitions.iter().map(|t| t.summary.as_str()).collect();
        assert_eq!(
            summaries,
            vec![
                r#"did click widget <Button android:text="Go"/>"#,
                "did rotate the screen",
                "did press the Back key"
            ]
        );
    }

    #[test]
    fn single_action_and_no_summaries() {
        let (mut device, state) = setup();
        let gw = gateway(r#"[{"role":"ActionFilter","respond":{"keep":[3,0]}}]"#);
        let options = ExploreOptions { summarize: false, single_action: true };
        let probes =
            pre_explore_with(&state, &spec(), &ExplorationPath::root(0), &mut device, &gw, options, false).unwrap();
        assert_eq!(probes.len(), 1);
        assert_eq!(probes[0].transition.summary, probes[0].transition.action_rendered);
        assert_eq!(gw.ledger_snapshot().calls(), 1);
    }

    #[test]
    fn path_render_numbers_and_flattens() {
        let (mut device, state) = setup();
        let gw = gateway(r#"[{"role":"ActionFilter","respond":{"keep":[0]}},{"role":"TransitionSummary","respond":{"summary":"two\nlines"}}]"#);
        let t = pre_explore(&state, &spec(), &ExplorationPath::root(0), &mut device, &gw).unwrap().remove(0);
        let path = ExplorationPath::root(0).child(1, t.clone()).child(2, t);
        assert_eq!(path.render(), "(1) two lines\n(2) two lines");
    }
}
