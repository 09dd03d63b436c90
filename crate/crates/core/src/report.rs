//! Bug reports and their distillation into a reproduction specification.
//!
//! Report files are UTF-8 text. Parsing rules, applied in order:
//!
//! 1. A leading byte-order mark is dropped and CRLF line endings become LF.
//! 2. The first line, trimmed, is the title. A blank title is an error.
//! 3. If the second line is blank it is skipped.
//! 4. The body runs up to the first line that reads exactly
//!    `--- comment ---` (surrounding whitespace ignored), or to the end.
//! 5. Each further delimiter starts a new comment.
//! 6. Body and comments lose leading and trailing blank lines; comments
//!    left empty are discarded.
//!
//! The report id is the file stem.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Attribute, Gateway, GatewayError, PromptContext, PromptRole};

pub const COMMENT_DELIMITER: &str = "--- comment ---";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("bug report has no title")]
    MissingTitle,
    #[error("cannot read bug report {path}: {reason}")]
    UnreadableFile { path: String, reason: String },
    #[error(transparent)]
    Gateway(GatewayError),
    #[error("report analysis never produced a valid specification: {0}")]
    UnparseableSpecification(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugReport {
    pub report_id: String,
    pub title: String,
    pub body: String,
    pub comments: Vec<String>,
}

impl BugReport {
    /// The `<bug report>` prompt attribute.
    pub fn render(&self) -> String {
        let mut out = format!("Title: {}\n", self.title);
        if !self.body.is_empty() {
            let _ = write!(out, "\n{}\n", self.body);
        }
        if !self.comments.is_empty() {
            out.push_str("\nComments:\n");
            for (i, comment) in self.comments.iter().enumerate() {
                let _ = write!(out, "[comment {}]\n{}\n", i + 1, comment);
            }
        }
        out
    }

    /// Title, body and comments as one plain text.
    pub fn full_text(&self) -> String {
        let mut parts = vec![self.title.as_str()];
        if !self.body.is_empty() {
            parts.push(&self.body);
        }
        parts.extend(self.comments.iter().map(String::as_str));
        parts.join("\n\n")
    }
}

pub fn load_report(path: impl AsRef<Path>) -> Result<BugReport, ReportError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)
        .map_err(|e| ReportError::UnreadableFile { path: path.display().to_string(), reason: e.to_string() })?;
    let text = String::from_utf8(bytes).map_err(|_| ReportError::UnreadableFile {
        path: path.display().to_string(),
        reason: "not valid UTF-8".into(),
    })?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_report(&id, &text)
}

pub fn parse_report(report_id: &str, text: &str) -> Result<BugReport, ReportError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text).replace("\r\n", "\n");
    let mut lines = text.split('\n');
    let title = lines.next().unwrap_or("").trim();
    if title.is_empty() {
        return Err(ReportError::MissingTitle);
    }
    let mut rest: Vec<&str> = lines.collect();
    if rest.first().is_some_and(|l| l.trim().is_empty()) {
        rest.remove(0);
    }
    let mut sections = rest.split(|l| l.trim() == COMMENT_DELIMITER);
    let body = trim_blank_lines(sections.next().unwrap_or(&[]));
    let comments = sections.map(trim_blank_lines).filter(|c| !c.is_empty()).collect();
    Ok(BugReport { report_id: report_id.to_owned(), title: title.to_owned(), body, comments })
}

fn trim_blank_lines(lines: &[&str]) -> String {
    let start = lines.iter().position(|l| !l.trim().is_empty()).unwrap_or(lines.len());
    let end = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(start, |e| e + 1);
    lines[start..end].join("\n")
}

/// Distilled steps and symptoms: the exploration objective.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproductionSpecification {
    pub steps: Vec<String>,
    pub symptoms: Vec<String>,
    pub expects_crash: bool,
}

impl ReproductionSpecification {
    pub fn validate(&self) -> Result<(), String> {
        if self.steps.iter().all(|s| s.trim().is_empty()) {
            return Err("`steps` must contain at least one non-empty step".into());
        }
        if self.symptoms.iter().all(|s| s.trim().is_empty()) {
            return Err("`symptoms` must contain at least one non-empty symptom".into());
        }
        Ok(())
    }

    /// The specification used when report analysis is switched off: the
    /// whole report as one step.
    pub fn from_raw_report(report: &BugReport) -> Self {
        ReproductionSpecification {
            steps: vec![report.full_text()],
            symptoms: vec!["see report".into()],
            expects_crash: false,
        }
    }

    /// The `<reproduction specification>` prompt attribute.
    pub fn render(&self) -> String {
        let mut out = String::from("Steps to reproduce:\n");
        for (i, step) in self.steps.iter().enumerate() {
            let _ = writeln!(out, "{}. {}", i + 1, step);
        }
        out.push_str("Expected symptoms:\n");
        for symptom in &self.symptoms {
            let _ = writeln!(out, "- {symptom}");
        }
        let _ = write!(out, "Bug kind: {}", if self.expects_crash { "crash" } else { "non-crash" });
        out
    }
}

pub fn analyze_report(report: &BugReport, gateway: &Gateway) -> Result<ReproductionSpecification, ReportError> {
    let ctx = PromptContext::new(PromptRole::ReportAnalysis).with(Attribute::BugReport, report.render());
    match gateway.complete_structured(&ctx, ReproductionSpecification::validate) {
        Ok(spec) => Ok(spec),
        Err(GatewayError::Unparseable { detail, .. }) => Err(ReportError::UnparseableSpecification(detail)),
        Err(e) => Err(ReportError::Gateway(e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockBackend, PriceTable};

    #[test]
    fn title_only() {
        let r = parse_report("r", "App crashes\n").unwrap();
        assert_eq!(r.title, "App crashes");
        assert_eq!(r.body, "");
        assert!(r.comments.is_empty());
    }

    #[test]
    fn empty_is_missing_title() {
        assert!(matches!(parse_report("r", ""), Err(ReportError::MissingTitle)));
        assert!(matches!(parse_report("r", "\u{feff}  \nbody"), Err(ReportError::MissingTitle)));
    }

    #[test]
    fn body_and_comments() {
        let text = "\u{feff}Title\r\n\r\nline 1\r\n\r\nline 2\r\n--- comment ---\r\n\r\nfirst\r\n --- comment --- \r\n\r\n--- comment ---\nsecond\n\n";
        let r = parse_report("r", text).unwrap();
        assert_eq!(r.title, "Title");
        assert_eq!(r.body, "line 1\n\nline 2");
        assert_eq!(r.comments, vec!["first", "second"]);
    }

    #[test]
    fn render_places_comments_after_body() {
        let r = BugReport {
            report_id: "r".into(),
            title: "T".into(),
            body: "B".into(),
            comments: vec!["C1".into(), "C2".into()],
        };
        assert_eq!(r.render(), "Title: T\n\nB\n\nComments:\n[comment 1]\nC1\n[comment 2]\nC2\n");
    }

    #[test]
    fn numbered_body_passes_through_default_mock() {
        let report = parse_report("r", "Crash when saving\n\n1. Open the app\n2. Tap Save\n").unwrap();
        let gw = Gateway::new(MockBackend::default(), PriceTable::default());
        let spec = analyze_report(&report, &gw).unwrap();
        assert_eq!(spec.steps, vec!["Open the app", "Tap Save"]);
        assert!(spec.expects_crash);
    }

    #[test]
    fn invalid_replies_exhaust_to_unparseable() {
        let report = parse_report("r", "T\n").unwrap();
        let mock = MockBackend::from_json(r#"[{"role":"ReportAnalysis","respond":{"steps":[],"symptoms":["x"],"expects_crash":false}}]"#)
            .unwrap();
        let gw = Gateway::new(mock, PriceTable::default());
        assert!(matches!(analyze_report(&report, &gw), Err(ReportError::UnparseableSpecification(_))));
        assert_eq!(gw.ledger_snapshot().calls(), 3);
    }
}
