//! Prompt roles, attributes and template instantiation.
//!
//! Templates live in `prompts/v1/` and use `{{attribute name}}`
//! placeholders. Substitution is a single left-to-right pass, so attribute
//! values are inserted verbatim and never re-scanned.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::GatewayError;

pub const TEMPLATE_VERSION: &str = "v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptRole {
    ReportAnalysis,
    ActionFilter,
    InputTextGen,
    TransitionSummary,
    PathEvaluation,
    BugVerification,
}

impl PromptRole {
    pub const ALL: [PromptRole; 6] = [
        PromptRole::ReportAnalysis,
        PromptRole::ActionFilter,
        PromptRole::InputTextGen,
        PromptRole::TransitionSummary,
        PromptRole::PathEvaluation,
        PromptRole::BugVerification,
    ];

    pub fn required_attributes(self) -> &'static [Attribute] {
        use Attribute::*;
        match self {
            PromptRole::ReportAnalysis => &[BugReport],
            PromptRole::ActionFilter => &[WidgetList, ReproductionSpecification, Path],
            PromptRole::InputTextGen => &[Widget, ReproductionSpecification, Path],
            PromptRole::TransitionSummary => &[Action, BeforeState, AfterState],
            PromptRole::PathEvaluation => &[PathList, ReproductionSpecification],
            PromptRole::BugVerification => &[Path, AfterState, ReproductionSpecification],
        }
    }

    pub fn template(self) -> &'static str {
        match self {
            PromptRole::ReportAnalysis => include_str!("../../prompts/v1/report_analysis.txt"),
            PromptRole::ActionFilter => include_str!("../../prompts/v1/action_filter.txt"),
            PromptRole::InputTextGen => include_str!("../../prompts/v1/input_text.txt"),
            PromptRole::TransitionSummary => include_str!("../../prompts/v1/transition_summary.txt"),
            PromptRole::PathEvaluation => include_str!("../../prompts/v1/path_evaluation.txt"),
            PromptRole::BugVerification => include_str!("../../prompts/v1/bug_verification.txt"),
        }
    }
}

impl fmt::Display for PromptRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attribute {
    BugReport,
    Widget,
    WidgetList,
    Path,
    PathList,
    ReproductionSpecification,
    Action,
    BeforeState,
    AfterState,
}

impl Attribute {
    pub const ALL: [Attribute; 9] = [
        Attribute::BugReport,
        Attribute::Widget,
        Attribute::WidgetList,
        Attribute::Path,
        Attribute::PathList,
        Attribute::ReproductionSpecification,
        Attribute::Action,
        Attribute::BeforeState,
        Attribute::AfterState,
    ];

    /// Placeholder name as written inside `{{ }}`.
    pub fn name(self) -> &'static str {
        match self {
            Attribute::BugReport => "bug report",
            Attribute::Widget => "widget",
            Attribute::WidgetList => "widget list",
            Attribute::Path => "path",
            Attribute::PathList => "path list",
            Attribute::ReproductionSpecification => "reproduction specification",
            Attribute::Action => "action",
            Attribute::BeforeState => "before state",
            Attribute::AfterState => "after state",
        }
    }

    pub fn from_name(name: &str) -> Option<Attribute> {
        Attribute::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptContext {
    pub role: PromptRole,
    pub attributes: BTreeMap<Attribute, String>,
}

impl PromptContext {
    pub fn new(role: PromptRole) -> Self {
        PromptContext { role, attributes: BTreeMap::new() }
    }

    pub fn with(mut self, attribute: Attribute, value: impl Into<String>) -> Self {
        self.attributes.insert(attribute, value.into());
        self
    }
}

/// Instantiates the role's template with the context's attributes.
pub fn build_prompt(ctx: &PromptContext) -> Result<String, GatewayError> {
    let required = ctx.role.required_attributes();
    if let Some(missing) = required.iter().find(|a| !ctx.attributes.contains_key(a)) {
        return Err(GatewayError::MissingAttribute { role: ctx.role, attribute: *missing });
    }
    if let Some(extra) = ctx.attributes.keys().find(|a| !required.contains(a)) {
        return Err(GatewayError::UnexpectedAttribute { role: ctx.role, attribute: *extra });
    }

    let template = ctx.role.template();
    let mut out = String::with_capacity(template.len() + ctx.attributes.values().map(String::len).sum::<usize>());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let name = &after[..end];
                match Attribute::from_name(name).and_then(|a| ctx.attributes.get(&a)) {
                    Some(value) => out.push_str(value),
                    None => {
                        out.push_str("{{");
                        out.push_str(name);
                        out.push_str("}}");
                    }
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Placeholders referenced by a template, in order of appearance.
pub fn template_placeholders(template: &str) -> Vec<&str> {
    let mut names = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else { break };
        names.push(&after[..end]);
        rest = &after[end + 2..];
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_ctx(role: PromptRole) -> PromptContext {
        role.required_attributes()
            .iter()
            .fold(PromptContext::new(role), |ctx, a| ctx.with(*a, format!("<{}>", a.name())))
    }

    #[test]
    fn templates_reference_exactly_their_attributes() {
        for role in PromptRole::ALL {
            let mut found: Vec<Attribute> = template_placeholders(role.template())
                .into_iter()
                .map(|n| Attribute::from_name(n).unwrap_or_else(|| panic!("{role}: unknown placeholder {n}")))
                .collect();
            found.sort();
            let mut expected = role.required_attributes().to_vec();
            expected.sort();
            assert_eq!(found, expected, "{role}");
        }
    }

    #[test]
    fn action_filter_block_order() {
        let prompt = build_prompt(&full_ctx(PromptRole::ActionFilter)).unwrap();
        let spec = prompt.find("<reproduction specification>").unwrap();
        let path = prompt.find("<path>").unwrap();
        let widgets = prompt.find("<widget list>").unwrap();
        assert!(spec < path && path < widgets);
    }

    #[test]
    fn missing_attribute_named() {
        let ctx = PromptContext::new(PromptRole::PathEvaluation).with(Attribute::PathList, "x");
        match build_prompt(&ctx) {
            Err(GatewayError::MissingAttribute { attribute, .. }) => {
                assert_eq!(attribute, Attribute::ReproductionSpecification)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unexpected_attribute_rejected() {
        let ctx = full_ctx(PromptRole::ReportAnalysis).with(Attribute::Path, "x");
        assert!(matches!(build_prompt(&ctx), Err(GatewayError::UnexpectedAttribute { .. })));
    }

    #[test]
    fn deterministic_and_verbatim() {
        let ctx = PromptContext::new(PromptRole::ReportAnalysis)
            .with(Attribute::BugReport, "Title: {{widget}} crash\n$1 and }} braces");
        let a = build_prompt(&ctx).unwrap();
        assert_eq!(a, build_prompt(&ctx).unwrap());
        assert!(a.contains("Title: {{widget}} crash\n$1 and }} braces"));
    }
}
