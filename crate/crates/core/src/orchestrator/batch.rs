use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::device::{SimApp, SimDevice};
use crate::gateway::{Gateway, HttpBackend, HttpConfig, MockBackend, UsageLedger};
use crate::report::load_report;

use super::{reproduce, OutcomeKind, ReproductionOutcome, SessionConfig, SessionMetrics};

pub const CSV_HEADER: [&str; 7] = ["report_id", "variant", "outcome", "actions", "tokens_k", "cost", "minutes"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SrError {
    #[error("success rate of an empty result set is undefined")]
    EmptyInput,
}

/// Fraction of successful sessions.
pub fn compute_sr(results: &[ReproductionOutcome]) -> Result<f64, SrError> {
    success_rate(results.iter().map(|r| r.outcome()))
}

pub fn success_rate(outcomes: impl IntoIterator<Item = OutcomeKind>) -> Result<f64, SrError> {
    let (mut total, mut ok) = (0u64, 0u64);
    for outcome in outcomes {
        total += 1;
        ok += u64::from(outcome == OutcomeKind::Success);
    }
    if total == 0 {
        return Err(SrError::EmptyInput);
    }
    Ok(ok as f64 / total as f64)
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("cannot read manifest {path}: {reason}")]
    Manifest { path: String, reason: String },
    #[error("manifest {0} lists no sessions")]
    EmptyManifest(String),
}

/// One manifest row; relative paths are resolved against the manifest's
/// directory by [`load_manifest`].
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub report: PathBuf,
    pub app: PathBuf,
    #[serde(default)]
    pub mock: Option<PathBuf>,
    #[serde(default)]
    pub ground_truth_depth: Option<usize>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, BatchError> {
    let path = path.as_ref();
    let fail = |reason: String| BatchError::Manifest { path: path.display().to_string(), reason };
    let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let mut entries: Vec<ManifestEntry> = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
    if entries.is_empty() {
        return Err(BatchError::EmptyManifest(path.display().to_string()));
    }
    let base = path.parent().unwrap_or(Path::new(""));
    for entry in &mut entries {
        entry.report = base.join(&entry.report);
        entry.app = base.join(&entry.app);
        entry.mock = entry.mock.as_ref().map(|m| base.join(m));
    }
    Ok(entries)
}

/// Backend used for rows without their own mock script.
#[derive(Clone, Debug)]
pub enum BackendChoice {
    None,
    Mock(PathBuf),
    Http(HttpConfig),
}

#[derive(Clone, Debug)]
pub struct BatchRow {
    pub variant: String,
    pub outcome: ReproductionOutcome,
    pub ground_truth_depth: Option<usize>,
}

/// Runs every entry with its own device and gateway, `parallel` at a time.
/// Rows come back in manifest order.
pub fn run_batch(
    entries: &[ManifestEntry],
    backend: &BackendChoice,
    config: &SessionConfig,
    parallel: usize,
) -> Vec<BatchRow> {
    let parallel = parallel.max(1);
    let mut rows: Vec<Option<BatchRow>> = vec![None; entries.len()];
    for (chunk_index, chunk) in entries.chunks(parallel).enumerate() {
        let results: Vec<BatchRow> = if parallel == 1 {
            chunk.iter().map(|e| run_entry(e, backend, config)).collect()
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> =
                    chunk.iter().map(|e| scope.spawn(move || run_entry(e, backend, config))).collect();
                handles.into_iter().map(|h| h.join().expect("session worker panicked")).collect()
            })
        };
        for (i, row) in results.into_iter().enumerate() {
            rows[chunk_index * parallel + i] = Some(row);
        }
    }
    rows.into_iter().map(|r| r.expect("every row filled")).collect()
}

fn run_entry(entry: &ManifestEntry, backend: &BackendChoice, config: &SessionConfig) -> BatchRow {
    let variant = config.variant();
    let fallback_id = entry.report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let outcome = match prepare(entry, backend, config) {
        Ok((report, app, gateway)) => {
            let mut device = SimDevice::new(app);
            reproduce(&report, &mut device, &gateway, config)
        }
        Err(message) => failed(fallback_id, message, config),
    };
    BatchRow { variant, outcome, ground_truth_depth: entry.ground_truth_depth }
}

type Prepared = (crate::report::BugReport, Arc<SimApp>, Gateway);

fn prepare(entry: &ManifestEntry, backend: &BackendChoice, config: &SessionConfig) -> Result<Prepared, String> {
    let report = load_report(&entry.report).map_err(|e| e.to_string())?;
    let app = Arc::new(SimApp::load(&entry.app).map_err(|e| e.to_string())?);
    let gateway = match (&entry.mock, backend) {
        (Some(mock), _) | (None, BackendChoice::Mock(mock)) => {
            Gateway::new(MockBackend::load(mock).map_err(|e| e.to_string())?, config.prices)
        }
        (None, BackendChoice::Http(http)) => Gateway::new(HttpBackend::new(http.clone()), config.prices),
        (None, BackendChoice::None) => return Err("no mock script and no endpoint configured".into()),
    };
    Ok((report, app, gateway))
}

/// An outcome for a session that could not start.
fn failed(report_id: String, message: String, config: &SessionConfig) -> ReproductionOutcome {
    ReproductionOutcome {
        report_id,
        spec: None,
        metrics: SessionMetrics {
            executed_actions: 0,
            ledger: UsageLedger::new(config.prices),
            wall_time: Duration::ZERO,
            outcome: OutcomeKind::Error,
            error: Some(message),
        },
        trace: None,
        trace_summaries: None,
        evidence: None,
    }
}

/// Header row, then one row per session. `normalize` zeroes the minutes.
pub fn write_metrics_csv(rows: &[BatchRow], out: impl Write, normalize: bool) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for row in rows {
        let m = &row.outcome.metrics;
        let minutes = if normalize { 0.0 } else { m.minutes() };
        writer.write_record([
            row.outcome.report_id.clone(),
            row.variant.clone(),
            m.outcome.name().to_owned(),
            m.executed_actions.to_string(),
            format!("{:.3}", m.tokens_k()),
            format!("{:.6}", m.ledger.total_cost),
            format!("{minutes:.4}"),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
