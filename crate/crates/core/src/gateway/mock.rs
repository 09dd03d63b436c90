//! Deterministic scripted backend.
//!
//! A script is a JSON array of rules:
//!
//! ```json
//! [
//!   {"role": "InputTextGen", "match": "Enter Name", "respond": {"text": "test2"}},
//!   {"role": "ActionFilter", "scope": "item", "regex": "^#\\d+ Click <TextView android:text=\"Alarms\"", "respond": "keep"}
//! ]
//! ```
//!
//! `match` is a substring test and `regex` a regular expression; a rule
//! with neither matches everything. `respond` is the reply text, or any
//! other JSON value which is sent in compact form. Regex rules expand
//! `${name}` and `${1}` captures inside `respond`; in a JSON-valued reply
//! the captured text is JSON-escaped.
//!
//! Prompt-scope rules (the default) are tested against the whole prompt in
//! script order and the first match answers. Failing that, a role with
//! item-scope rules gets a reply composed item by item:
//!
//! * ActionFilter items are the actions of the widget list, one per
//!   action, as `#3 LongClick <TextView android:text="test2"/>`. Rules
//!   answer `keep` or `drop`; unmatched actions are dropped.
//! * PathEvaluation items are the `[path N]` blocks of the path list.
//!   Rules answer `continue`, `prune` or `success`; the rank of a path is
//!   the position of the rule that matched it. Unmatched paths are pruned.
//!
//! Roles without a matching rule fall back to a safe default: the filter
//! keeps everything, the evaluator continues every path, input text is
//! `test`, verification refuses, summaries restate the action and the new
//! screen, and report analysis echoes numbered report lines as steps.

use std::path::Path;

use regex::Regex;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::{BackendError, LlmBackend, PromptRole, RawCompletion};

#[derive(Debug, Error)]
pub enum MockScriptError {
    #[error("cannot read mock script {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("mock script schema violation: {0}")]
    SchemaViolation(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleScope {
    #[default]
    Prompt,
    Item,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    role: PromptRole,
    #[serde(rename = "match")]
    substring: Option<String>,
    regex: Option<String>,
    #[serde(default)]
    scope: RuleScope,
    respond: Value,
}

#[derive(Clone, Debug)]
enum Matcher {
    Any,
    Substring(String),
    Regex(Regex),
}

#[derive(Clone, Debug)]
pub struct MockRule {
    pub role: PromptRole,
    pub scope: RuleScope,
    matcher: Matcher,
    respond: String,
    /// `respond` was given as a JSON value, so captures are JSON-escaped.
    json_reply: bool,
}

/// Replaces `${name}` and `${n}` with captured text; unknown groups expand
/// to nothing.
fn expand(template: &str, caps: &regex::Captures<'_>, json_escape: bool) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find('}') else {
            out.push_str(&rest[start..]);
            return out;
        };
        let name = &after[..end];
        let value = match name.parse::<usize>() {
            Ok(n) => caps.get(n),
            Err(_) => caps.name(name),
        }
        .map_or("", |m| m.as_str());
        if json_escape {
            let quoted = serde_json::to_string(value).expect("strings serialize");
            out.push_str(&quoted[1..quoted.len() - 1]);
        } else {
            out.push_str(value);
        }
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    out
}

impl MockRule {
    /// The rule's reply for `text`, if it matches.
    fn answer(&self, text: &str) -> Option<String> {
        match &self.matcher {
            Matcher::Any => Some(self.respond.clone()),
            Matcher::Substring(s) => text.contains(s.as_str()).then(|| self.respond.clone()),
            Matcher::Regex(re) => re.captures(text).map(|caps| expand(&self.respond, &caps, self.json_reply)),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct MockBackend {
    rules: Vec<MockRule>,
}

impl MockBackend {
    pub fn load(path: impl AsRef<Path>) -> Result<MockBackend, MockScriptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| MockScriptError::Io { path: path.display().to_string(), source })?;
        MockBackend::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<MockBackend, MockScriptError> {
        let entries: Vec<RuleEntry> =
            serde_json::from_str(text).map_err(|e| MockScriptError::SchemaViolation(e.to_string()))?;
        let rules = entries
            .into_iter()
            .enumerate()
            .map(|(i, entry)| compile(i, entry))
            .collect::<Result<_, _>>()?;
        Ok(MockBackend { rules })
    }

    pub fn rules(&self) -> &[MockRule] {
        &self.rules
    }

    /// The reply for `prompt`; pure in (script, role, prompt).
    pub fn respond(&self, role: PromptRole, prompt: &str) -> String {
        let own = || self.rules.iter().filter(move |r| r.role == role);
        if let Some(reply) = own().filter(|r| r.scope == RuleScope::Prompt).find_map(|r| r.answer(prompt)) {
            return reply;
        }
        let items: Vec<&MockRule> = own().filter(|r| r.scope == RuleScope::Item).collect();
        if !items.is_empty() {
            match role {
                PromptRole::ActionFilter => return compose_filter(&items, prompt),
                PromptRole::PathEvaluation => return compose_verdicts(&items, prompt),
                _ => {}
            }
        }
        default_reply(role, prompt)
    }
}

fn compile(index: usize, entry: RuleEntry) -> Result<MockRule, MockScriptError> {
    let violation = |msg: String| MockScriptError::SchemaViolation(format!("rule {index}: {msg}"));
    let matcher = match (entry.substring, entry.regex) {
        (Some(_), Some(_)) => return Err(violation("`match` and `regex` are mutually exclusive".into())),
        (Some(s), None) => Matcher::Substring(s),
        (None, Some(re)) => Matcher::Regex(Regex::new(&re).map_err(|e| violation(e.to_string()))?),
        (None, None) => Matcher::Any,
    };
    let json_reply = !entry.respond.is_string();
    let respond = match entry.respond {
        Value::String(s) => s,
        other => other.to_string(),
    };
    if entry.scope == RuleScope::Item {
        let allowed: &[&str] = match entry.role {
            PromptRole::ActionFilter => &["keep", "drop"],
            PromptRole::PathEvaluation => &["continue", "prune", "success"],
            role => return Err(violation(format!("{role} has no item scope"))),
        };
        if !allowed.contains(&respond.as_str()) {
            return Err(violation(format!("item reply must be one of {allowed:?}, got {respond:?}")));
        }
    }
    Ok(MockRule { role: entry.role, scope: entry.scope, matcher, respond, json_reply })
}

/// Text between `### Name` and `### End name`, without the marker lines.
pub fn extract_block<'a>(prompt: &'a str, name: &str) -> Option<&'a str> {
    let open = format!("### {name}\n");
    let close = format!("### End {}", name.to_lowercase());
    let start = prompt.find(&open)? + open.len();
    let len = prompt[start..].find(&close)?;
    Some(prompt[start..start + len].trim_end_matches('\n'))
}

fn compose_filter(rules: &[&MockRule], prompt: &str) -> String {
    let mut keep = Vec::new();
    for (index, item) in filter_items(prompt) {
        if rules.iter().find_map(|r| r.answer(&item)).as_deref() == Some("keep") {
            keep.push(index);
        }
    }
    json!({ "keep": keep }).to_string()
}

/// `(index, "#index Label <widget>")` for every action in the widget list.
fn filter_items(prompt: &str) -> Vec<(usize, String)> {
    let mut items = Vec::new();
    let Some(list) = extract_block(prompt, "Widget list") else { return items };
    for line in list.lines() {
        let Some((widget, tags)) = line.rsplit_once(" | ") else { continue };
        for tag in tags.split(", ") {
            let Some(rest) = tag.strip_prefix('#') else { continue };
            let Some((index, label)) = rest.split_once(' ') else { continue };
            let Ok(index) = index.parse::<usize>() else { continue };
            items.push((index, format!("#{index} {label} {widget}")));
        }
    }
    items
}

fn compose_verdicts(rules: &[&MockRule], prompt: &str) -> String {
    let mut verdicts = Vec::new();
    for (path, block) in path_items(prompt) {
        let hit = rules.iter().enumerate().find_map(|(rank, r)| r.answer(&block).map(|d| (rank, d)));
        let (decision, rank, rationale) = match hit {
            Some((rank, decision)) => (decision, rank + 1, format!("matched item rule {}", rank + 1)),
            None => ("prune".to_owned(), rules.len() + 1, "no item rule matched".to_owned()),
        };
        verdicts.push(json!({ "path": path, "decision": decision, "rank": rank, "rationale": rationale }));
    }
    json!({ "verdicts": verdicts }).to_string()
}

/// `(id, block)` for every `[path N]` entry, the block running from its
/// header to the line before the next header.
fn path_items(prompt: &str) -> Vec<(u64, String)> {
    let mut items: Vec<(u64, String)> = Vec::new();
    let Some(list) = extract_block(prompt, "Path list") else { return items };
    for line in list.lines() {
        let header = line.strip_prefix("[path ").and_then(|r| r.strip_suffix(']')).and_then(|n| n.parse().ok());
        match (header, items.last_mut()) {
            (Some(id), _) => items.push((id, line.to_owned())),
            (None, Some((_, block))) => {
                block.push('\n');
                block.push_str(line);
            }
            (None, None) => {}
        }
    }
    for (_, block) in &mut items {
        let trimmed = block.trim_end().len();
        block.truncate(trimmed);
    }
    items
}

fn default_reply(role: PromptRole, prompt: &str) -> String {
    match role {
        PromptRole::ReportAnalysis => {
            let report = extract_block(prompt, "Bug report").unwrap_or("");
            let title = report
                .lines()
                .find_map(|l| l.strip_prefix("Title: "))
                .unwrap_or("the reported bug")
                .trim()
                .to_owned();
            let steps: Vec<String> = report.lines().filter_map(numbered_step).collect();
            let steps = if steps.is_empty() { vec![title.clone()] } else { steps };
            json!({
                "steps": steps,
                "symptoms": [title],
                "expects_crash": report.to_lowercase().contains("crash"),
            })
            .to_string()
        }
        PromptRole::ActionFilter => {
            let keep: Vec<usize> = filter_items(prompt).into_iter().map(|(i, _)| i).collect();
            json!({ "keep": keep }).to_string()
        }
        PromptRole::InputTextGen => json!({ "text": "test" }).to_string(),
        PromptRole::TransitionSummary => {
            let action = extract_block(prompt, "Action").unwrap_or("the action").trim();
            let screen = extract_block(prompt, "After state")
                .and_then(|s| s.lines().find_map(|l| l.strip_prefix("Screen: ")))
                .unwrap_or("an unchanged screen");
            json!({ "summary": format!("{action}; the screen now shows: {screen}") }).to_string()
        }
        PromptRole::PathEvaluation => {
            let verdicts: Vec<Value> = path_items(prompt)
                .into_iter()
                .enumerate()
                .map(|(i, (path, _))| {
                    json!({ "path": path, "decision": "continue", "rank": i + 1, "rationale": "default" })
                })
                .collect();
            json!({ "verdicts": verdicts }).to_string()
        }
        PromptRole::BugVerification => {
            json!({ "confirmed": false, "evidence": "no verification rule matched" }).to_string()
        }
    }
}

fn numbered_step(line: &str) -> Option<String> {
    let line = line.trim();
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    let rest = line[digits..].strip_prefix(['.', ')'])?;
    let step = rest.trim();
    (!step.is_empty()).then(|| step.to_owned())
}

fn whitespace_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

impl LlmBackend for MockBackend {
    fn complete(&self, role: PromptRole, prompt: &str) -> Result<RawCompletion, BackendError> {
        let content = self.respond(role, prompt);
        Ok(RawCompletion {
            prompt_tokens: whitespace_tokens(prompt),
            completion_tokens: whitespace_tokens(&content),
            content,
        })
    }

    fn wants_backoff(&self) -> bool {
        false
    }
}
