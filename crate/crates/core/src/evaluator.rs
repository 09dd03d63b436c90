//! Path evaluation (prune, keep, flag success) and bug verification.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::explorer::{render_summaries, ExplorationPath};
use crate::gateway::{Attribute, Gateway, GatewayError, PromptContext, PromptRole};
use crate::report::ReproductionSpecification;
use crate::ui::render_state;

pub const DEFAULT_BEAM: usize = 3;

/// Summaries shown per path in the path list; older ones are elided.
pub const PATH_TAIL: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Continue,
    Prune,
    CandidateSuccess,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathVerdict {
    pub path_id: u64,
    pub decision: Decision,
    pub rationale: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationResult {
    pub confirmed: bool,
    pub evidence: String,
}

#[derive(Deserialize)]
struct VerdictReply {
    verdicts: Vec<RawVerdict>,
}

#[derive(Deserialize)]
struct RawVerdict {
    path: u64,
    decision: String,
    #[serde(default)]
    rank: Option<i64>,
    #[serde(default)]
    rationale: Option<String>,
}

#[derive(Deserialize)]
struct VerificationReply {
    confirmed: bool,
    #[serde(default)]
    evidence: String,
}

fn parse_decision(text: &str) -> Option<Decision> {
    match text.trim().to_ascii_lowercase().as_str() {
        "continue" => Some(Decision::Continue),
        "prune" => Some(Decision::Prune),
        "success" | "candidatesuccess" | "candidate_success" => Some(Decision::CandidateSuccess),
        _ => None,
    }
}

/// The `<path list>` prompt attribute.
pub fn render_path_list(paths: &[&ExplorationPath]) -> String {
    let mut out = String::new();
    for path in paths {
        let _ = writeln!(out, "[path {}]", path.path_id);
        let skipped = path.len().saturating_sub(PATH_TAIL);
        if skipped > 0 {
            let _ = writeln!(out, "(transitions 1 to {skipped} omitted; showing the last {PATH_TAIL})");
        }
        if path.is_empty() {
            out.push_str("(no actions taken yet)\n");
        } else {
            out.push_str(&render_summaries(&path.transitions[skipped..], skipped + 1));
            out.push('\n');
        }
    }
    out
}

/// Judges every path once. At most `beam` paths continue; paths ending in a
/// crash are candidates outright when a crash is expected.
pub fn evaluate_paths(
    paths: &[ExplorationPath],
    spec: &ReproductionSpecification,
    gateway: &Gateway,
    beam: usize,
) -> Result<Vec<PathVerdict>, GatewayError> {
    let beam = beam.max(1);
    let auto = |p: &ExplorationPath| spec.expects_crash && p.is_terminal();
    let judged: Vec<&ExplorationPath> = paths.iter().filter(|p| !auto(p)).collect();

    // (decision, rank, rationale) per judged path, in `judged` order.
    let mut decided: Vec<(Decision, i64, String)> = Vec::with_capacity(judged.len());
    if !judged.is_empty() {
        let ctx = PromptContext::new(PromptRole::PathEvaluation)
            .with(Attribute::PathList, render_path_list(&judged))
            .with(Attribute::ReproductionSpecification, spec.render());
        let ids: Vec<u64> = judged.iter().map(|p| p.path_id).collect();
        let reply = gateway.complete_structured::<VerdictReply, _>(&ctx, |r| {
            if let Some(bad) = r.verdicts.iter().find(|v| parse_decision(&v.decision).is_none()) {
                return Err(format!("unknown decision {:?}", bad.decision));
            }
            if !r.verdicts.iter().any(|v| ids.contains(&v.path)) {
                return Err("no verdict names a listed path".into());
            }
            Ok(())
        });
        match reply {
            Ok(reply) => {
                for path in &judged {
                    let verdict = reply.verdicts.iter().find(|v| v.path == path.path_id);
                    decided.push(match verdict {
                        Some(v) => (
                            parse_decision(&v.decision).expect("validated"),
                            v.rank.unwrap_or(i64::MAX),
                            v.rationale.clone().unwrap_or_default(),
                        ),
                        None => (Decision::Prune, i64::MAX, "no verdict returned".to_owned()),
                    });
                }
            }
            Err(GatewayError::Unparseable { detail, .. }) => {
                // Keep the longest paths.
                let mut order: Vec<usize> = (0..judged.len()).collect();
                order.sort_by_key(|&i| (std::cmp::Reverse(judged[i].len()), judged[i].path_id));
                decided = vec![(Decision::Prune, i64::MAX, format!("verdicts unusable ({detail})")); judged.len()];
                for (rank, &i) in order.iter().enumerate() {
                    if rank < beam && !judged[i].is_terminal() {
                        decided[i] = (Decision::Continue, rank as i64, "kept as one of the longest paths".into());
                    }
                }
            }
            Err(e) => return Err(e),
        }
    }

    for (path, entry) in judged.iter().zip(decided.iter_mut()) {
        if path.is_terminal() && entry.0 == Decision::Continue {
            *entry = (Decision::Prune, entry.1, "the app crashed; the path cannot be extended".into());
        }
    }

    // Beam clamp: best rank first, then lower path id.
    let mut continuing: Vec<usize> = (0..judged.len()).filter(|&i| decided[i].0 == Decision::Continue).collect();
    continuing.sort_by_key(|&i| (decided[i].1, judged[i].path_id));
    for &i in continuing.iter().skip(beam) {
        decided[i].0 = Decision::Prune;
        decided[i].2 = format!("beyond the beam of {beam}: {}", decided[i].2);
    }

    let mut judged_iter = decided.into_iter();
    Ok(paths
        .iter()
        .map(|p| {
            if auto(p) {
                let record = p.last().and_then(|t| t.crash_record.as_deref()).unwrap_or("");
                PathVerdict {
                    path_id: p.path_id,
                    decision: Decision::CandidateSuccess,
                    rationale: format!("the last action crashed the app: {}", record.lines().next().unwrap_or("")),
                }
            } else {
                let (decision, _, rationale) = judged_iter.next().expect("one entry per judged path");
                PathVerdict { path_id: p.path_id, decision, rationale }
            }
        })
        .collect())
}

/// Confirms a candidate. Crash bugs need a crash log; other bugs are
/// checked against the final screen by the gateway.
pub fn verify_bug(
    path: &ExplorationPath,
    spec: &ReproductionSpecification,
    device_crash_log: Option<&str>,
    gateway: &Gateway,
) -> Result<VerificationResult, GatewayError> {
    if spec.expects_crash {
        return Ok(match device_crash_log.filter(|log| !log.trim().is_empty()) {
            Some(log) => VerificationResult { confirmed: true, evidence: log.to_owned() },
            None => VerificationResult {
                confirmed: false,
                evidence: "the report describes a crash but no crash was logged".into(),
            },
        });
    }
    let final_screen = match path.last() {
        Some(t) => match (&t.after, &t.crash_record) {
            (Some(after), _) => render_state(after),
            (None, Some(record)) => format!("The app crashed with the following error log:\n{record}"),
            (None, None) => render_state(&t.before),
        },
        None => "(no actions taken yet)".to_owned(),
    };
    let ctx = PromptContext::new(PromptRole::BugVerification)
        .with(Attribute::Path, path.render())
        .with(Attribute::AfterState, final_screen)
        .with(Attribute::ReproductionSpecification, spec.render());
    let reply = gateway.complete_structured::<VerificationReply, _>(&ctx, |r| {
        if r.confirmed && r.evidence.trim().is_empty() {
            Err("a confirmation needs evidence".into())
        } else {
            Ok(())
        }
    });
    match reply {
        Ok(r) => Ok(VerificationResult { confirmed: r.confirmed, evidence: r.evidence }),
        Err(GatewayError::Unparseable { detail, .. }) => {
            Ok(VerificationResult { confirmed: false, evidence: format!("verification reply unusable: {detail}") })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::Transition;
    use crate::gateway::{MockBackend, PriceTable};
    use crate::ui::{parse_view_hierarchy, UIAction, UIState};

    fn state(visual: &str) -> UIState {
        UIState::detached("s", "Main", parse_view_hierarchy("<node class=\"FrameLayout\"/>").unwrap(), visual)
    }

    fn transition(summary: &str, crash: Option<&str>) -> Transition {
        Transition {
            action: UIAction::rotate(),
            action_rendered: "rotate the screen".into(),
            before: state("before"),
            after: if crash.is_some() { None } else { Some(state(summary)) },
            crashed: crash.is_some(),
            crash_record: crash.map(str::to_owned),
            summary: summary.into(),
        }
    }

    fn path(id: u64, summaries: &[&str]) -> ExplorationPath {
        summaries.iter().fold(ExplorationPath::root(id), |p, s| p.child(id, transition(s, None)))
    }

    fn spec(expects_crash: bool) -> ReproductionSpecification {
        ReproductionSpecification { steps: vec!["s".into()], symptoms: vec!["x".into()], expects_crash }
    }

    fn gateway(script: &str) -> Gateway {
        Gateway::new(MockBackend::from_json(script).unwrap(), PriceTable::default())
    }

    #[test]
    fn motivating_iteration() {
        let gw = gateway(
            r#"[{"role":"PathEvaluation","scope":"item","match":"empty contents","respond":"continue"}]"#,
        );
        let paths = vec![
            path(1, &["Clicking 'Alarms' opens the folder, updates the view to show its empty contents"]),
            path(2, &["expands a mini-menu with quick actions for creating a folder, file, or cloud connection"]),
        ];
        let verdicts = evaluate_paths(&paths, &spec(true), &gw, 3).unwrap();
        assert_eq!(verdicts[0].decision, Decision::Continue);
        assert_eq!(verdicts[1].decision, Decision::Prune);
    }

    #[test]
    fn beam_clamps_continues_by_rank_then_id() {
        let gw = gateway("[]");
        let paths: Vec<_> = (1..=5).map(|i| path(i, &["step"])).collect();
        let verdicts = evaluate_paths(&paths, &spec(false), &gw, 3).unwrap();
        let kept: Vec<u64> =
            verdicts.iter().filter(|v| v.decision == Decision::Continue).map(|v| v.path_id).collect();
        assert_eq!(kept, vec![1, 2, 3]);
        assert_eq!(verdicts.len(), 5);
    }

    #[test]
    fn crash_auto_promoted_without_gateway() {
        let gw = gateway(r#"[{"role":"PathEvaluation","respond":"{\"verdicts\":[]}"}]"#);
        let crashed = ExplorationPath::root(7).child(7, transition("boom", Some("java.lang.IllegalArgumentException")));
        let verdicts = evaluate_paths(&[crashed], &spec(true), &gw, 3).unwrap();
        assert_eq!(verdicts[0].decision, Decision::CandidateSuccess);
        assert_eq!(gw.ledger_snapshot().calls(), 0);
    }

    #[test]
    fn unparseable_keeps_longest() {
        let gw = gateway(r#"[{"role":"PathEvaluation","respond":"no idea"}]"#);
        let paths = vec![path(1, &["a"]), path(2, &["a", "b", "c"]), path(3, &["a", "b"])];
        let verdicts = evaluate_paths(&paths, &spec(false), &gw, 2).unwrap();
        let kept: Vec<u64> =
            verdicts.iter().filter(|v| v.decision == Decision::Continue).map(|v| v.path_id).collect();
        assert_eq!(kept, vec![2, 3]);
    }

    #[test]
    fn long_paths_truncated_in_rendering() {
        let summaries: Vec<String> = (1..=25).map(|i| format!("step {i}")).collect();
        let refs: Vec<&str> = summaries.iter().map(String::as_str).collect();
        let p = path(4, &refs);
        let text = render_path_list(&[&p]);
        assert!(text.starts_with("[path 4]\n(transitions 1 to 5 omitted; showing the last 20)\n(6) step 6\n"));
        assert!(text.ends_with("(25) step 25\n"));
        assert!(!text.contains("(5) step 5"));
    }

    #[test]
    fn crash_rule() {
        let gw = gateway("[]");
        let p = path(1, &["x"]);
        let yes = verify_bug(&p, &spec(true), Some("FATAL EXCEPTION\njava.lang.IllegalArgumentException"), &gw).unwrap();
        assert!(yes.confirmed && yes.evidence.contains("IllegalArgumentException"));
        let no = verify_bug(&p, &spec(true), None, &gw).unwrap();
        assert!(!no.confirmed);
        assert_eq!(gw.ledger_snapshot().calls(), 0);
    }

    #[test]
    fn non_crash_asks_gateway() {
        let gw = gateway(
            r#"[{"role":"BugVerification","match":"note duplicated in list","respond":{"confirmed":true,"evidence":"two identical notes"}}]"#,
        );
        let p = path(1, &["note duplicated in list"]);
        let r = verify_bug(&p, &spec(false), None, &gw).unwrap();
        assert!(r.confirmed);
        assert_eq!(r.evidence, "two identical notes");
        let other = path(2, &["all fine"]);
        assert!(!verify_bug(&other, &spec(false), None, &gw).unwrap().confirmed);
    }
}
