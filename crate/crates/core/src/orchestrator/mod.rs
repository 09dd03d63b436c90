//! Reproduction sessions: report analysis, the explore/evaluate loop under
//! budgets, verification, and the resulting trace and metrics.

mod batch;
mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::device::{Device, DeviceError, SnapshotId, StepResult};
use crate::evaluator::{evaluate_paths, verify_bug, Decision, DEFAULT_BEAM};
use crate::explorer::{pre_explore_with, ExplorationPath, ExploreOptions, ExplorerError, PathStatus};
use crate::gateway::{Gateway, GatewayError, PriceTable, UsageLedger};
use crate::report::{analyze_report, BugReport, ReportError, ReproductionSpecification};
use crate::ui::{UIAction, UIState};

pub use batch::{
    compute_sr, load_manifest, run_batch, success_rate, write_metrics_csv, BackendChoice, BatchError, BatchRow,
    ManifestEntry, SrError, CSV_HEADER,
};
pub use oracle::{brute_force_oracle, replay};

/// Ablation variants, each disabling one part of the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Ablation {
    /// No report analysis: the raw report is the only step.
    RA,
    /// No pre-assessment of several actions: one action per state.
    AE,
    /// No transition summaries: paths are described by their actions.
    TA,
    /// No bug verification: candidates are accepted as they are.
    BV,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::RA, Ablation::AE, Ablation::TA, Ablation::BV];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::RA => "ra",
            Ablation::AE => "ae",
            Ablation::TA => "ta",
            Ablation::BV => "bv",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown variant {s:?} (expected ra, ae, ta or bv)"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub max_actions: u64,
    pub max_minutes: f64,
    pub beam: usize,
    pub ablations: BTreeSet<Ablation>,
    pub prices: PriceTable,
    /// End-of-path snapshots kept for repositioning; older ones are
    /// released and their paths replayed from reset.
    pub snapshot_cap: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            max_actions: 100,
            max_minutes: 60.0,
            beam: DEFAULT_BEAM,
            ablations: BTreeSet::new(),
            prices: PriceTable::default(),
            snapshot_cap: 8,
        }
    }
}

impl SessionConfig {
    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablations.insert(ablation);
        self
    }

    /// `full`, or the enabled ablations joined by `+`.
    pub fn variant(&self) -> String {
        if self.ablations.is_empty() {
            "full".to_owned()
        } else {
            self.ablations.iter().map(|a| a.name()).collect::<Vec<_>>().join("+")
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_actions < 1 {
            return Err("max_actions must be at least 1".into());
        }
        if self.beam < 1 {
            return Err("beam must be at least 1".into());
        }
        if !(self.max_minutes > 0.0) {
            return Err("max_minutes must be positive".into());
        }
        Ok(())
    }

    fn has(&self, ablation: Ablation) -> bool {
        self.ablations.contains(&ablation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeKind {
    Success,
    BudgetExceededActions,
    BudgetExceededTime,
    Exhausted,
    Error,
}

impl OutcomeKind {
    pub fn name(self) -> &'static str {
        match self {
            OutcomeKind::Success => "Success",
            OutcomeKind::BudgetExceededActions => "BudgetExceededActions",
            OutcomeKind::BudgetExceededTime => "BudgetExceededTime",
            OutcomeKind::Exhausted => "Exhausted",
            OutcomeKind::Error => "Error",
        }
    }
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionMetrics {
    /// Every device execute, probes and repositioning replays included.
    pub executed_actions: u64,
    pub ledger: UsageLedger,
    pub wall_time: Duration,
    pub outcome: OutcomeKind,
    pub error: Option<String>,
}

impl SessionMetrics {
    pub fn tokens_k(&self) -> f64 {
        self.ledger.total_tokens() as f64 / 1000.0
    }

    pub fn minutes(&self) -> f64 {
        self.wall_time.as_secs_f64() / 60.0
    }
}

#[derive(Clone, Debug)]
pub struct ReproductionOutcome {
    pub report_id: String,
    pub spec: Option<ReproductionSpecification>,
    pub metrics: SessionMetrics,
    /// The confirmed path's actions; present iff the outcome is Success.
    pub trace: Option<Vec<UIAction>>,
    pub trace_summaries: Option<Vec<String>>,
    pub evidence: Option<String>,
}

impl ReproductionOutcome {
    pub fn outcome(&self) -> OutcomeKind {
        self.metrics.outcome
    }

    /// The outcome file content. `normalize` zeroes wall-time fields.
    pub fn to_json(&self, variant: &str, normalize: bool) -> serde_json::Value {
        let m = &self.metrics;
        let wall = if normalize { 0.0 } else { m.wall_time.as_secs_f64() };
        let per_role: BTreeMap<String, _> =
            m.ledger.per_role.iter().map(|(role, usage)| (role.to_string(), usage)).collect();
        json!({
            "report_id": self.report_id,
            "variant": variant,
            "outcome": m.outcome.name(),
            "error": m.error,
            "metrics": {
                "actions": m.executed_actions,
                "prompt_tokens": m.ledger.prompt_tokens(),
                "completion_tokens": m.ledger.completion_tokens(),
                "tokens_k": m.tokens_k(),
                "cost": m.ledger.total_cost,
                "wall_seconds": wall,
                "calls": m.ledger.calls(),
                "per_role": per_role,
            },
            "specification": self.spec,
            "trace": self.trace,
            "trace_summaries": self.trace_summaries,
            "evidence": self.evidence,
        })
    }
}

/// Counts executes and refuses them once a budget is spent, so the count
/// never exceeds `max_actions`.
pub struct BudgetedDevice<D> {
    inner: D,
    executed: u64,
    max_actions: u64,
    deadline: Instant,
}

impl<D: Device> BudgetedDevice<D> {
    pub fn new(inner: D, max_actions: u64, deadline: Instant) -> Self {
        BudgetedDevice { inner, executed: 0, max_actions, deadline }
    }

    pub fn executed(&self) -> u64 {
        self.executed
    }
}

impl<D: Device> Device for BudgetedDevice<D> {
    fn reset(&mut self) -> Result<UIState, DeviceError> {
        self.inner.reset()
    }

    fn capture_screen(&mut self) -> Result<UIState, DeviceError> {
        self.inner.capture_screen()
    }

    fn execute(&mut self, action: &UIAction) -> Result<StepResult, DeviceError> {
        if self.executed >= self.max_actions {
            return Err(DeviceError::ActionBudgetExhausted);
        }
        if Instant::now() >= self.deadline {
            return Err(DeviceError::TimeBudgetExhausted);
        }
        self.executed += 1;
        self.inner.execute(action)
    }

    fn snapshot(&mut self) -> Result<SnapshotId, DeviceError> {
        self.inner.snapshot()
    }

    fn rollback(&mut self, id: SnapshotId) -> Result<(), DeviceError> {
        self.inner.rollback(id)
    }

    fn release_snapshot(&mut self, id: SnapshotId) {
        self.inner.release_snapshot(id)
    }

    fn crash_log(&self) -> Option<String> {
        self.inner.crash_log()
    }
}

enum Stop {
    Budget(OutcomeKind),
    Failure(String),
}

impl From<ExplorerError> for Stop {
    fn from(e: ExplorerError) -> Self {
        match e {
            ExplorerError::Device(d) => d.into(),
            ExplorerError::Gateway(g) => Stop::Failure(g.to_string()),
            ExplorerError::Ui(u) => Stop::Failure(u.to_string()),
        }
    }
}

impl From<DeviceError> for Stop {
    fn from(e: DeviceError) -> Self {
        match e {
            DeviceError::ActionBudgetExhausted => Stop::Budget(OutcomeKind::BudgetExceededActions),
            DeviceError::TimeBudgetExhausted => Stop::Budget(OutcomeKind::BudgetExceededTime),
            other => Stop::Failure(other.to_string()),
        }
    }
}

impl From<GatewayError> for Stop {
    fn from(e: GatewayError) -> Self {
        Stop::Failure(e.to_string())
    }
}

struct Found {
    path: ExplorationPath,
    evidence: String,
}

/// Runs one reproduction session end to end. Device and gateway failures
/// end the session with outcome Error and the metrics gathered so far.
pub fn reproduce<D: Device>(
    report: &BugReport,
    device: D,
    gateway: &Gateway,
    config: &SessionConfig,
) -> ReproductionOutcome {
    let started = Instant::now();
    let usage_before = gateway.ledger_snapshot();
    let deadline = started + Duration::from_secs_f64(config.max_minutes.max(0.0) * 60.0);
    let mut device = BudgetedDevice::new(device, config.max_actions, deadline);

    let mut spec = None;
    let result = config
        .validate()
        .map_err(Stop::Failure)
        .and_then(|_| session(report, &mut device, gateway, config, deadline, &mut spec));

    let (outcome, error, found) = match result {
        Ok(Some(found)) => (OutcomeKind::Success, None, Some(found)),
        Ok(None) => (OutcomeKind::Exhausted, None, None),
        Err(Stop::Budget(kind)) => (kind, None, None),
        Err(Stop::Failure(msg)) => (OutcomeKind::Error, Some(msg), None),
    };
    let metrics = SessionMetrics {
        executed_actions: device.executed(),
        ledger: gateway.ledger_snapshot().since(&usage_before, config.prices),
        wall_time: started.elapsed(),
        outcome,
        error,
    };
    ReproductionOutcome {
        report_id: report.report_id.clone(),
        spec,
        metrics,
        trace: found.as_ref().map(|f| f.path.actions()),
        trace_summaries: found.as_ref().map(|f| f.path.summaries()),
        evidence: found.map(|f| f.evidence),
    }
}

fn session<D: Device>(
    report: &BugReport,
    device: &mut BudgetedDevice<D>,
    gateway: &Gateway,
    config: &SessionConfig,
    deadline: Instant,
    spec_out: &mut Option<ReproductionSpecification>,
) -> Result<Option<Found>, Stop> {
    let spec = if config.has(Ablation::RA) {
        ReproductionSpecification::from_raw_report(report)
    } else {
        match analyze_report(report, gateway) {
            Ok(spec) => spec,
            Err(ReportError::Gateway(e)) => return Err(e.into()),
            Err(e) => return Err(Stop::Failure(e.to_string())),
        }
    };
    *spec_out = Some(spec.clone());

    let options = ExploreOptions { summarize: !config.has(Ablation::TA), single_action: config.has(Ablation::AE) };
    device.reset()?;
    let mut frontier = vec![ExplorationPath::root(0)];
    let mut next_id = 1u64;
    let mut snapshots = SnapshotCache::new(config.snapshot_cap);

    let outcome = loop {
        if frontier.is_empty() {
            break Ok(None);
        }
        if Instant::now() >= deadline {
            break Err(Stop::Budget(OutcomeKind::BudgetExceededTime));
        }
        let step = iterate(&spec, &mut frontier, &mut next_id, &mut snapshots, device, gateway, config, options);
        match step {
            Ok(Some(found)) => break Ok(Some(found)),
            Ok(None) => {}
            Err(stop) => break Err(stop),
        }
    };
    snapshots.clear(device);
    outcome
}

/// One round: expand every frontier path, evaluate the children, verify
/// candidates. Leaves the next frontier in `frontier`.
#[allow(clippy::too_many_arguments)]
fn iterate<D: Device>(
    spec: &ReproductionSpecification,
    frontier: &mut Vec<ExplorationPath>,
    next_id: &mut u64,
    snapshots: &mut SnapshotCache,
    device: &mut BudgetedDevice<D>,
    gateway: &Gateway,
    config: &SessionConfig,
    options: ExploreOptions,
) -> Result<Option<Found>, Stop> {
    let mut children = Vec::new();
    for path in frontier.iter() {
        let state = reposition(path, snapshots, device)?;
        let probes = pre_explore_with(&state, spec, path, device, gateway, options, true)?;
        for probe in probes {
            let child = path.child(*next_id, probe.transition);
            if let Some(id) = probe.end_snapshot {
                snapshots.insert(child.path_id, id);
            }
            *next_id += 1;
            children.push(child);
        }
    }
    for path in frontier.iter() {
        snapshots.release(path.path_id, device);
    }
    frontier.clear();
    if children.is_empty() {
        return Ok(None);
    }

    let verdicts = evaluate_paths(&children, spec, gateway, config.beam)?;
    let mut candidates = Vec::new();
    for (mut child, verdict) in children.into_iter().zip(verdicts) {
        match verdict.decision {
            Decision::Prune => {
                child.status = PathStatus::Pruned;
                snapshots.release(child.path_id, device);
            }
            Decision::Continue => frontier.push(child),
            Decision::CandidateSuccess => {
                child.status = PathStatus::CandidateSuccess;
                candidates.push(child);
            }
        }
    }

    for mut candidate in candidates {
        let evidence = if config.has(Ablation::BV) {
            Some("accepted without verification".to_owned())
        } else {
            let crash_log = candidate.last().and_then(|t| t.crash_record.clone());
            let result = verify_bug(&candidate, spec, crash_log.as_deref(), gateway)?;
            result.confirmed.then_some(result.evidence)
        };
        match evidence {
            Some(evidence) => {
                candidate.status = PathStatus::ConfirmedSuccess;
                return Ok(Some(Found { path: candidate, evidence }));
            }
            None if candidate.is_terminal() => snapshots.release(candidate.path_id, device),
            None => {
                candidate.status = PathStatus::Active;
                frontier.push(candidate);
            }
        }
    }
    frontier.sort_by_key(|p| p.path_id);
    snapshots.retain_cap(device);
    Ok(None)
}

/// Brings the device to the end of `path`: restore its snapshot if one is
/// held, otherwise replay from reset.
fn reposition<D: Device>(
    path: &ExplorationPath,
    snapshots: &mut SnapshotCache,
    device: &mut BudgetedDevice<D>,
) -> Result<UIState, Stop> {
    if let Some(id) = snapshots.get(path.path_id) {
        if device.rollback(id).is_ok() {
            return Ok(device.capture_screen()?);
        }
        snapshots.forget(path.path_id);
    }
    let mut state = device.reset()?;
    for (i, transition) in path.transitions.iter().enumerate() {
        let step = device.execute(&transition.action)?;
        if step.crashed {
            return Err(Stop::Failure(format!("replay of path {} crashed at step {}", path.path_id, i + 1)));
        }
        state = step.new_state;
    }
    Ok(state)
}

/// End-of-path snapshots keyed by path id.
struct SnapshotCache {
    cap: usize,
    held: BTreeMap<u64, SnapshotId>,
}

impl SnapshotCache {
    fn new(cap: usize) -> Self {
        SnapshotCache { cap, held: BTreeMap::new() }
    }

    fn get(&self, path_id: u64) -> Option<SnapshotId> {
        self.held.get(&path_id).copied()
    }

    fn insert(&mut self, path_id: u64, id: SnapshotId) {
        self.held.insert(path_id, id);
    }

    fn forget(&mut self, path_id: u64) {
        self.held.remove(&path_id);
    }

    fn release<D: Device>(&mut self, path_id: u64, device: &mut D) {
        if let Some(id) = self.held.remove(&path_id) {
            device.release_snapshot(id);
        }
    }

    /// Evicts the oldest paths' snapshots beyond the cap.
    fn retain_cap<D: Device>(&mut self, device: &mut D) {
        while self.held.len() > self.cap {
            let (_, id) = self.held.pop_first().expect("non-empty");
            device.release_snapshot(id);
        }
    }

    fn clear<D: Device>(&mut self, device: &mut D) {
        for (_, id) in std::mem::take(&mut self.held) {
            device.release_snapshot(id);
        }
    }
}
