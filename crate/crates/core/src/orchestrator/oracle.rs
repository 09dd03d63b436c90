use std::collections::{HashSet, VecDeque};

use crate::device::{BugKind, Device, DeviceError, SimApp, SimConfig, SimDevice};
use crate::evaluator::VerificationResult;
use crate::ui::{derive_tree_actions, ActionKind, UIAction};

/// Executes `trace` from a fresh reset and checks that a bug shows: a
/// crash, or a final screen carrying a non-crash bug's symptom.
pub fn replay(trace: &[UIAction], device: &mut SimDevice) -> VerificationResult {
    let unconfirmed = |evidence: String| VerificationResult { confirmed: false, evidence };
    let mut state = match device.reset() {
        Ok(state) => state,
        Err(e) => return unconfirmed(format!("reset failed: {e}")),
    };
    for (i, action) in trace.iter().enumerate() {
        match device.execute(action) {
            Ok(step) if step.crashed => {
                return VerificationResult {
                    confirmed: true,
                    evidence: step.crash_record.unwrap_or_else(|| format!("crash at step {}", i + 1)),
                };
            }
            Ok(step) => state = step.new_state,
            Err(DeviceError::UnresolvedTarget(id)) => {
                return unconfirmed(format!("step {}: target {id} does not exist on the screen", i + 1));
            }
            Err(e) => return unconfirmed(format!("step {}: {e}", i + 1)),
        }
    }
    let app = device.app().clone();
    let symptom = app
        .bugs
        .iter()
        .filter(|b| b.kind == BugKind::NonCrash)
        .filter_map(|b| b.symptom_descriptor.as_deref())
        .find(|s| state.visual_descriptor.contains(s));
    match symptom {
        Some(s) => VerificationResult { confirmed: true, evidence: format!("final screen shows: {s}") },
        None => unconfirmed("no crash occurred and no bug symptom is on the final screen".into()),
    }
}

/// Breadth-first search over the full action space of `app` for a shortest
/// sequence entering the trigger state of `bug_id`. InputText actions are
/// tried with every word of [`SimApp::input_vocabulary`].
pub fn brute_force_oracle(app: &SimApp, bug_id: &str, max_depth: usize) -> Option<Vec<UIAction>> {
    let bug = app.bug(bug_id)?;
    let start = app.initial_config();
    if start.state == bug.trigger {
        return Some(Vec::new());
    }
    let vocabulary = app.input_vocabulary();
    let is_crash_state = |key: &str| app.crash_bug_at(key).is_some();

    let mut seen: HashSet<SimConfig> = HashSet::from([start.clone()]);
    // (config, index of parent entry, action leading here)
    let mut nodes: Vec<(SimConfig, usize, Option<UIAction>)> = vec![(start, usize::MAX, None)];
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    while let Some((index, depth)) = queue.pop_front() {
        if depth >= max_depth {
            continue;
        }
        let config = nodes[index].0.clone();
        for action in expand(&derive_tree_actions(&app.state(&config.state).hierarchy), &vocabulary) {
            let Ok(next) = app.step(&config, &action) else { continue };
            if next.state == bug.trigger && next.state != config.state {
                let mut path = vec![action];
                let mut at = index;
                while let Some(prev) = nodes[at].2.clone() {
                    path.push(prev);
                    at = nodes[at].1;
                }
                path.reverse();
                return Some(path);
            }
            if is_crash_state(&next.state) || !seen.insert(next.clone()) {
                continue;
            }
            nodes.push((next, index, Some(action)));
            queue.push_back((nodes.len() - 1, depth + 1));
        }
    }
    None
}

fn expand(actions: &[UIAction], vocabulary: &[String]) -> Vec<UIAction> {
    let mut out = Vec::with_capacity(actions.len());
    for action in actions {
        match (action.kind, action.target) {
            (ActionKind::InputText, Some(target)) => {
                out.extend(vocabulary.iter().map(|w| UIAction::input(target, w.clone())));
            }
            _ => out.push(action.clone()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ui::NodeId;
    use std::sync::Arc;

    const APP: &str = r#"{
        "schema": 1, "app_name": "o", "initial_state": "a",
        "states": {
          "a": { "activity": "M", "visual": "a", "hierarchy_xml": "<node class=\"F\"><node class=\"Button\" text=\"x\" clickable=\"true\"/><node class=\"EditText\" editable=\"true\"/></node>" },
          "b": { "activity": "M", "visual": "b", "hierarchy_xml": "<node class=\"F\"><node class=\"Button\" text=\"y\" clickable=\"true\"/></node>" },
          "c": { "activity": "M", "visual": "c shows a duplicated note", "hierarchy_xml": "<node class=\"F\"/>" },
          "boom": { "activity": "M", "visual": "", "hierarchy_xml": "<node class=\"F\"/>" }
        },
        "rules": [
          { "from": "a", "on": { "kind": "InputText", "input_pattern": "^secret$" }, "to": "b" },
          { "from": "b", "on": { "kind": "Click", "target_text": "y" }, "to": "c" },
          { "from": "a", "on": { "kind": "Click", "target_text": "x" }, "to": "boom" }
        ],
        "bugs": [
          { "id": "dup", "kind": "NonCrash", "trigger": "c", "symptom": "duplicated note" },
          { "id": "crash", "kind": "Crash", "trigger": "boom", "crash_log": "E: boom" },
          { "id": "start", "kind": "NonCrash", "trigger": "a", "symptom": "a" }
        ]
    }"#;

    fn app() -> SimApp {
        SimApp::from_json(APP).unwrap()
    }

    #[test]
    fn shortest_paths() {
        let app = app();
        let dup = brute_force_oracle(&app, "dup", 5).unwrap();
        assert_eq!(dup, vec![UIAction::input(NodeId(2), "secret"), UIAction::click(NodeId(1))]);
        assert_eq!(brute_force_oracle(&app, "crash", 5).unwrap(), vec![UIAction::click(NodeId(1))]);
        assert_eq!(brute_force_oracle(&app, "start", 5), Some(vec![]));
        assert_eq!(brute_force_oracle(&app, "dup", 1), None);
        assert_eq!(brute_force_oracle(&app, "nope", 5), None);
    }

    #[test]
    fn replay_confirms_both_kinds() {
        let app = Arc::new(app());
        let mut device = SimDevice::new(app.clone());
        let dup = brute_force_oracle(&app, "dup", 5).unwrap();
        assert!(replay(&dup, &mut device).confirmed);
        let crash = replay(&[UIAction::click(NodeId(1))], &mut device);
        assert!(crash.confirmed && crash.evidence.contains("boom"));
    }

    #[test]
    fn replay_reports_failing_step() {
        let mut device = SimDevice::new(Arc::new(app()));
        let r = replay(&[UIAction::input(NodeId(2), "secret"), UIAction::click(NodeId(9))], &mut device);
        assert!(!r.confirmed);
        assert!(r.evidence.starts_with("step 2"), "{}", r.evidence);
    }
}
