#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use serde_json::json;

use droidrepro::device::{Device, SimApp, SimDevice};
use droidrepro::explorer::{filter_actions, pre_explore, select, ExplorationPath};
use droidrepro::gateway::{Gateway, MockBackend, PriceTable, PromptRole, UsageLedger};
use droidrepro::report::ReproductionSpecification;
use droidrepro::ui::{derive_actions, parse_view_hierarchy, UIAction, UIState};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn spec(expects_crash: bool) -> ReproductionSpecification {
    ReproductionSpecification {
        steps: vec!["Open the screen".into(), "Tap b1".into()],
        symptoms: vec!["The app crashes".into()],
        expects_crash,
    }
}

pub fn gateway(rules: serde_json::Value) -> Gateway {
    Gateway::new(MockBackend::from_json(&rules.to_string()).unwrap(), PriceTable::default())
}

// ---- random apps -------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ScreenShape {
    pub buttons: usize,
    pub field: bool,
    pub scrolls: bool,
}

#[derive(Clone, Debug)]
pub struct RandomApp {
    pub screens: Vec<ScreenShape>,
    /// `(from, button, to, incr)`; `to == screens.len()` is the crash state.
    pub edges: Vec<(usize, usize, usize, bool)>,
}

impl RandomApp {
    pub fn json(&self) -> String {
        let n = self.screens.len();
        let mut states = serde_json::Map::new();
        for (i, s) in self.screens.iter().enumerate() {
            let mut xml = String::from(r#"<node class="FrameLayout">"#);
            for b in 0..s.buttons {
                xml.push_str(&format!(r#"<node class="Button" text="b{b}" clickable="true" long-clickable="{}"/>"#, b % 2 == 0));
            }
            if s.field {
                xml.push_str(r#"<node class="EditText" text="name" resource-id="f" editable="true"/>"#);
            }
            if s.scrolls {
                xml.push_str(r#"<node class="ListView" resource-id="l" scrollable="true"><node class="TextView" text="row"/></node>"#);
            }
            xml.push_str("</node>");
            states.insert(format!("s{i}"), json!({ "activity": format!("A{}", i % 2), "hierarchy_xml": xml, "visual": format!("screen {i}") }));
        }
        states.insert("boom".into(), json!({ "activity": "A0", "hierarchy_xml": "<node class=\"FrameLayout\"/>", "visual": "gone" }));
        let mut rules = Vec::new();
        for &(from, button, to, incr) in &self.edges {
            let to = if to >= n { "boom".to_owned() } else { format!("s{to}") };
            let mut rule = json!({ "from": format!("s{from}"), "on": { "kind": "Click", "target_text": format!("b{button}") }, "to": to });
            if incr {
                rule["effects"] = json!([{ "incr": "n" }]);
            }
            rules.push(rule);
        }
        for (i, s) in self.screens.iter().enumerate() {
            if s.field {
                rules.push(json!({ "from": format!("s{i}"), "on": { "kind": "InputText", "input_pattern": "^go$" }, "to": format!("s{}", (i + 1) % n) }));
            }
            if s.scrolls {
                rules.push(json!({ "from": format!("s{i}"), "on": { "kind": "Swipe", "direction": "up" }, "to": "s0", "effects": [{ "set": "scrolled", "value": "yes" }] }));
            }
        }
        json!({
            "schema": 1, "app_name": "random", "initial_state": "s0",
            "states": states, "rules": rules,
            "bugs": [{ "id": "boom", "kind": "Crash", "trigger": "boom", "crash_log": "E: boom" }],
        })
        .to_string()
    }

    pub fn device(&self) -> SimDevice {
        SimDevice::new(Arc::new(SimApp::from_json(&self.json()).expect("random app is valid")))
    }
}

pub fn random_app() -> impl Strategy<Value = RandomApp> {
    let screen = (1usize..=4, any::<bool>(), prop::bool::weighted(0.3))
        .prop_map(|(buttons, field, scrolls)| ScreenShape { buttons, field, scrolls });
    prop::collection::vec(screen, 2..=5).prop_flat_map(|screens| {
        let n = screens.len();
        let edge = (0..n, 0usize..4, 0..=n, any::<bool>());
        (Just(screens), prop::collection::vec(edge, 1..12)).prop_map(|(screens, edges)| {
            let edges = edges.into_iter().filter(|&(from, b, _, _)| b < screens[from].buttons).collect();
            RandomApp { screens, edges }
        })
    })
}

/// Drives the device along `walk` (indices into the enumerated actions),
/// resetting after any crash.
pub fn wander(device: &mut SimDevice, walk: &[usize]) -> UIState {
    let mut state = device.reset().unwrap();
    for &pick in walk {
        let actions = derive_actions(&state);
        let action = &actions[pick % actions.len()];
        let step = device.execute(action).unwrap();
        state = if step.crashed { device.reset().unwrap() } else { step.new_state };
    }
    state
}

// ---- properties -----------------------------------------------------------

/// Pre-exploration leaves the device where it was and yields one transition
/// per retained action.
pub fn check_state_discipline(app: &RandomApp, walk: &[usize], keep: &[i64]) -> Result<(), TestCaseError> {
    let mut device = app.device();
    let state = wander(&mut device, walk);
    let before_fp = device.capture_screen().unwrap().fingerprint();
    let before_pos = device.position().clone();
    let gw = gateway(json!([
        { "role": "ActionFilter", "respond": { "keep": keep } },
        { "role": "InputTextGen", "respond": { "text": "go" } },
    ]));
    let transitions = pre_explore(&state, &spec(true), &ExplorationPath::root(0), &mut device, &gw)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(device.capture_screen().unwrap().fingerprint(), before_fp);
    prop_assert_eq!(device.position(), &before_pos);
    prop_assert!(device.crash_log().is_none());
    let retained = select(&derive_actions(&state), keep);
    prop_assert_eq!(transitions.len(), retained.len());
    for (t, a) in transitions.iter().zip(&retained) {
        prop_assert_eq!(t.action.kind, a.kind);
        prop_assert_eq!(t.action.target, a.target);
        prop_assert_eq!(t.crashed, t.after.is_none());
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub enum FilterReply {
    Keep(Vec<i64>),
    Garbage(String),
}

pub fn filter_reply() -> impl Strategy<Value = FilterReply> {
    prop_oneof![
        3 => prop::collection::vec(-3i64..14, 0..8).prop_map(FilterReply::Keep),
        1 => prop_oneof![
            Just("not json at all".to_owned()),
            Just(r#"{"keep": "all"}"#.to_owned()),
            Just(r#"{"drop": [1]}"#.to_owned()),
            Just("[1, 2]".to_owned()),
        ]
        .prop_map(FilterReply::Garbage),
    ]
}

pub fn check_filter_subset(app: &RandomApp, walk: &[usize], reply: &FilterReply) -> Result<(), TestCaseError> {
    let mut device = app.device();
    let state = wander(&mut device, walk);
    let actions = derive_actions(&state);
    let respond = match reply {
        FilterReply::Keep(keep) => json!({ "keep": keep }),
        FilterReply::Garbage(text) => json!(text),
    };
    let gw = gateway(json!([{ "role": "ActionFilter", "respond": respond }]));
    let kept = filter_actions(&actions, &state, &spec(true), &ExplorationPath::root(0), &gw)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;

    // order-preserving subset
    let mut rest = actions.iter();
    for a in &kept {
        prop_assert!(rest.any(|b| b == a), "{:?} out of order or foreign", a);
    }
    let valid: Vec<usize> = match reply {
        FilterReply::Keep(keep) => (0..actions.len()).filter(|i| keep.contains(&(*i as i64))).collect(),
        FilterReply::Garbage(_) => Vec::new(),
    };
    if valid.is_empty() {
        prop_assert_eq!(&kept, &actions);
    } else {
        let expected: Vec<UIAction> = valid.iter().map(|&i| actions[i].clone()).collect();
        prop_assert_eq!(&kept, &expected);
    }
    Ok(())
}

pub fn check_ledger_additivity(records: &[(usize, u64, u64)], prices: PriceTable) -> Result<(), TestCaseError> {
    let mut ledger = UsageLedger::new(prices);
    let (mut p, mut c) = (0u64, 0u64);
    let mut per_role = [0u64; 6];
    for &(role, pt, ct) in records {
        ledger.record(PromptRole::ALL[role % 6], pt, ct);
        p += pt;
        c += ct;
        per_role[role % 6] += 1;
    }
    prop_assert_eq!(ledger.prompt_tokens(), p);
    prop_assert_eq!(ledger.completion_tokens(), c);
    prop_assert_eq!(ledger.total_tokens(), p + c);
    prop_assert_eq!(ledger.calls(), records.len() as u64);
    for (i, role) in PromptRole::ALL.iter().enumerate() {
        prop_assert_eq!(ledger.per_role.get(role).map_or(0, |u| u.calls), per_role[i]);
    }
    let hand = p as f64 / 1000.0 * prices.prompt_per_1k + c as f64 / 1000.0 * prices.completion_per_1k;
    prop_assert!((ledger.total_cost - hand).abs() < 5e-7, "{} vs {}", ledger.total_cost, hand);
    Ok(())
}

// ---- random hierarchies -------------------------------------------------------

#[derive(Clone, Debug)]
pub struct NodeSpec {
    pub class: String,
    pub text: Option<String>,
    pub flags: [bool; 6],
    pub bounds: Option<(i32, i32, u16, u16)>,
    pub children: Vec<NodeSpec>,
}

impl NodeSpec {
    pub fn xml(&self) -> String {
        let esc = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('"', "&quot;");
        let mut out = format!(r#"<node class="{}""#, esc(&self.class));
        if let Some(t) = &self.text {
            out.push_str(&format!(r#" text="{}""#, esc(t)));
        }
        if let Some((l, t, w, h)) = self.bounds {
            out.push_str(&format!(r#" bounds="[{l},{t}][{},{}]""#, l + i32::from(w), t + i32::from(h)));
        }
        for (name, v) in ["clickable", "long-clickable", "editable", "scrollable", "enabled", "visible"].iter().zip(self.flags) {
            out.push_str(&format!(r#" {name}="{v}""#));
        }
        if self.children.is_empty() {
            out.push_str("/>");
        } else {
            out.push('>');
            for c in &self.children {
                out.push_str(&c.xml());
            }
            out.push_str("</node>");
        }
        out
    }
}

pub fn node_spec() -> impl Strategy<Value = NodeSpec> {
    let leaf = (
        "[A-Za-z][A-Za-z.]{0,12}",
        prop::option::of("[ -~]{0,10}"),
        any::<[bool; 6]>(),
        prop::option::of((-50i32..1000, -50i32..2000, any::<u16>(), any::<u16>())),
    )
        .prop_map(|(class, text, flags, bounds)| NodeSpec { class, text, flags, bounds, children: vec![] });
    leaf.prop_recursive(3, 24, 4, |inner| {
        (inner.clone(), prop::collection::vec(inner, 0..4)).prop_map(|(mut n, children)| {
            n.children = children;
            n
        })
    })
}

pub fn check_parse_round_trip(node: &NodeSpec) -> Result<(), TestCaseError> {
    let first = parse_view_hierarchy(&node.xml()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let second = parse_view_hierarchy(&first.to_xml()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(&first, &second);
    prop_assert_eq!(first.widget_count, first.iter().count());
    Ok(())
}

/// Rolling back to a snapshot restores the screen and replaying the same
/// actions reproduces the same screens.
pub fn check_snapshot_determinism(app: &RandomApp, prefix: &[usize], suffix: &[usize]) -> Result<(), TestCaseError> {
    let mut device = app.device();
    wander(&mut device, prefix);
    let snap = device.snapshot().unwrap();
    let at_snap = device.capture_screen().unwrap();
    let run = |device: &mut SimDevice| -> Vec<String> {
        let mut seen = Vec::new();
        let mut state = device.capture_screen().unwrap();
        for &pick in suffix {
            let actions = derive_actions(&state);
            let step = device.execute(&actions[pick % actions.len()]).unwrap();
            if step.crashed {
                seen.push(format!("crash {}", step.crash_record.unwrap_or_default()));
                break;
            }
            seen.push(step.new_state.fingerprint());
            state = step.new_state;
        }
        seen
    };
    let first = run(&mut device);
    device.rollback(snap).unwrap();
    prop_assert_eq!(device.capture_screen().unwrap().fingerprint(), at_snap.fingerprint());
    prop_assert!(device.crash_log().is_none());
    let second = run(&mut device);
    prop_assert_eq!(first, second);
    Ok(())
}

// ---- fixture sessions ----------------------------------------------------------

use droidrepro::evaluator::VerificationResult;
use droidrepro::orchestrator::{
    load_manifest, replay, run_batch, BackendChoice, ManifestEntry, ReproductionOutcome, SessionConfig,
};

pub fn manifest(name: &str) -> Vec<ManifestEntry> {
    load_manifest(fixtures().join(name)).unwrap()
}

pub fn run(entry: &ManifestEntry, config: &SessionConfig) -> ReproductionOutcome {
    run_batch(std::slice::from_ref(entry), &BackendChoice::None, config, 1).remove(0).outcome
}

pub fn app_of(entry: &ManifestEntry) -> Arc<SimApp> {
    Arc::new(SimApp::load(&entry.app).unwrap())
}

pub fn replay_on_fresh_device(entry: &ManifestEntry, trace: &[UIAction]) -> VerificationResult {
    replay(trace, &mut SimDevice::new(app_of(entry)))
}

pub fn name_of(entry: &ManifestEntry) -> String {
    entry.app.file_stem().unwrap().to_string_lossy().into_owned()
}
