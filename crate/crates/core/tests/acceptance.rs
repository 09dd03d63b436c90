//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use common::*;
use droidrepro::device::SimDevice;
use droidrepro::gateway::{Gateway, MockBackend, PriceTable, PromptRole, UsageLedger};
use droidrepro::orchestrator::{
    brute_force_oracle, compute_sr, reproduce, run_batch, success_rate, write_metrics_csv, Ablation, BackendChoice,
    OutcomeKind, SessionConfig,
};
use droidrepro::report::load_report;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn runner() -> TestRunner {
    TestRunner::new(Config { cases: 256, failure_persistence: None, ..Config::default() })
}

fn fixture_suite() -> Result<String, String> {
    let started = Instant::now();
    let entries = manifest("main.json");
    ensure(entries.len() >= 10, || format!("only {} fixtures", entries.len()))?;
    let depths: Vec<usize> = entries.iter().map(|e| e.ground_truth_depth.unwrap_or(0)).collect();
    ensure(depths.iter().min() == Some(&1) && depths.iter().max() == Some(&15), || format!("depths {depths:?}"))?;
    let amaze = entries.iter().find(|e| name_of(e) == "amaze-mini");
    ensure(amaze.and_then(|e| e.ground_truth_depth) == Some(10), || "amaze-mini missing or not at depth 10".into())?;

    let mut actions = Vec::new();
    for entry in &entries {
        let outcome = run(entry, &SessionConfig::default());
        let name = name_of(entry);
        ensure(outcome.outcome() == OutcomeKind::Success, || format!("{name}: {}", outcome.outcome().name()))?;
        ensure(outcome.metrics.executed_actions <= 100, || format!("{name}: {} actions", outcome.metrics.executed_actions))?;
        let trace = outcome.trace.clone().unwrap_or_default();
        ensure(replay_on_fresh_device(entry, &trace).confirmed, || format!("{name}: trace does not replay"))?;
        actions.push(outcome.metrics.executed_actions);
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{}/{} reproduced, actions {actions:?}, {:.2}s", entries.len(), entries.len(), elapsed.as_secs_f64()))
}

fn oracle_equivalence() -> Result<String, String> {
    let entries: Vec<_> = manifest("main.json").into_iter().chain(manifest("adversarial/manifest.json")).collect();
    let mut slowest = Duration::ZERO;
    for entry in &entries {
        let name = name_of(entry);
        let app = app_of(entry);
        let bug = &app.ground_truth.as_ref().ok_or(format!("{name}: no ground truth"))?.bug_id;
        let started = Instant::now();
        let path = brute_force_oracle(&app, bug, 15).ok_or(format!("{name}: oracle found nothing"))?;
        let took = started.elapsed();
        slowest = slowest.max(took);
        ensure(took < Duration::from_secs(30), || format!("{name}: oracle took {took:?}"))?;
        ensure(Some(path.len()) == entry.ground_truth_depth, || {
            format!("{name}: oracle {} vs declared {:?}", path.len(), entry.ground_truth_depth)
        })?;
        ensure(replay_on_fresh_device(entry, &path).confirmed, || format!("{name}: oracle path does not replay"))?;
        let outcome = run(entry, &SessionConfig::default());
        let trace = outcome.trace.ok_or(format!("{name}: engine did not reproduce"))?;
        ensure(trace.len() >= path.len(), || format!("{name}: engine trace shorter than the oracle's"))?;
        ensure(replay_on_fresh_device(entry, &trace).confirmed, || format!("{name}: engine trace does not replay"))?;
    }
    Ok(format!("{} fixtures, slowest oracle {:.3}s", entries.len(), slowest.as_secs_f64()))
}

fn state_discipline() -> Result<String, String> {
    let strategy = (random_app(), prop::collection::vec(0usize..32, 0..6), prop::collection::vec(-2i64..12, 0..6));
    runner()
        .run(&strategy, |(app, walk, keep)| check_state_discipline(&app, &walk, &keep))
        .map_err(|e| e.to_string())?;
    Ok("256 random cases, 0 violations".into())
}

fn filter_subset() -> Result<String, String> {
    let strategy = (random_app(), prop::collection::vec(0usize..32, 0..4), filter_reply());
    runner()
        .run(&strategy, |(app, walk, reply)| check_filter_subset(&app, &walk, &reply))
        .map_err(|e| e.to_string())?;
    Ok("256 random cases, 0 violations".into())
}

fn budget_enforcement() -> Result<String, String> {
    let fx = fixtures();
    let app = std::sync::Arc::new(droidrepro::device::SimApp::load(fx.join("apps/amaze-mini.json")).map_err(|e| e.to_string())?);
    let report = load_report(fx.join("reports/amaze-mini.txt")).map_err(|e| e.to_string())?;
    let mut seen = Vec::new();
    for max in [1u64, 5, 50] {
        let backend = MockBackend::load(fx.join("mocks/amaze-uninformed.json")).map_err(|e| e.to_string())?;
        let gateway = Gateway::new(backend, PriceTable::default());
        let config = SessionConfig { max_actions: max, ..SessionConfig::default() };
        let outcome = reproduce(&report, SimDevice::new(app.clone()), &gateway, &config);
        ensure(outcome.outcome() == OutcomeKind::BudgetExceededActions, || {
            format!("max {max}: {}", outcome.outcome().name())
        })?;
        let executed = outcome.metrics.executed_actions;
        ensure(executed <= max + 1, || format!("max {max}: executed {executed}"))?;
        seen.push(format!("{max}->{executed}"));
    }
    Ok(format!("executed {}", seen.join(", ")))
}

fn crash_guard() -> Result<String, String> {
    let entry = &manifest("guard.json")[0];
    let mut runs = 0;
    for (max_actions, beam) in [(10u64, 1usize), (50, 3), (100, 3), (100, 5)] {
        let config = SessionConfig { max_actions, beam, ..SessionConfig::default() };
        let outcome = run(entry, &config);
        let spec = outcome.spec.as_ref().ok_or("no specification")?;
        ensure(spec.expects_crash, || "fixture spec should expect a crash".into())?;
        ensure(outcome.outcome() != OutcomeKind::Success, || format!("reported Success at max {max_actions} beam {beam}"))?;
        runs += 1;
    }
    let unguarded = run(entry, &SessionConfig::default().with_ablation(Ablation::BV));
    ensure(unguarded.outcome() == OutcomeKind::Success, || "the mock's false claim was never exercised".into())?;
    Ok(format!("{runs} guarded sessions without Success; w/o BV the false claim is accepted"))
}

fn ablation_direction() -> Result<String, String> {
    let entries = manifest("adversarial/manifest.json");
    ensure(entries.len() >= 5, || format!("only {} adversarial fixtures", entries.len()))?;
    let count = |config: &SessionConfig| -> Vec<bool> {
        run_batch(&entries, &BackendChoice::None, config, 1)
            .into_iter()
            .map(|r| r.outcome.outcome() == OutcomeKind::Success)
            .collect()
    };
    let full = count(&SessionConfig::default());
    let ta = count(&SessionConfig::default().with_ablation(Ablation::TA));
    let ae = count(&SessionConfig::default().with_ablation(Ablation::AE));
    let (nf, nt, na) = (full.iter().filter(|s| **s).count(), ta.iter().filter(|s| **s).count(), ae.iter().filter(|s| **s).count());
    ensure(nf > nt, || format!("full {nf} vs w/o TA {nt}"))?;
    let witnesses = full.iter().zip(&ae).filter(|(f, a)| **f && !**a).count();
    ensure(witnesses >= 1, || "no fixture where full succeeds and w/o AE fails".into())?;
    Ok(format!("full {nf}/5, w/o TA {nt}/5, w/o AE {na}/5, {witnesses} AE witnesses"))
}

fn metrics_arithmetic() -> Result<String, String> {
    let mut kinds = vec![OutcomeKind::Success; 7];
    kinds.extend([OutcomeKind::Exhausted, OutcomeKind::BudgetExceededActions, OutcomeKind::BudgetExceededTime]);
    ensure(success_rate(kinds).ok() == Some(0.7), || "7 of 10".into())?;
    ensure(success_rate(vec![OutcomeKind::Error; 3]).ok() == Some(0.0), || "0 of 3".into())?;
    ensure(success_rate(Vec::new()).is_err(), || "empty set must be rejected".into())?;
    let mixed: Vec<_> = manifest("mixed.json").iter().map(|e| run(e, &SessionConfig::default())).collect();
    ensure(compute_sr(&mixed).ok() == Some(0.9), || format!("mixed manifest SR {:?}", compute_sr(&mixed)))?;

    let prices = PriceTable { prompt_per_1k: 0.002, completion_per_1k: 0.008 };
    let mut ledger = UsageLedger::new(prices);
    for (role, p, c) in [
        (PromptRole::ReportAnalysis, 1200, 150),
        (PromptRole::ActionFilter, 800, 20),
        (PromptRole::ActionFilter, 750, 30),
        (PromptRole::TransitionSummary, 400, 60),
        (PromptRole::PathEvaluation, 1350, 90),
        (PromptRole::BugVerification, 500, 50),
    ] {
        ledger.record(role, p, c);
    }
    // 5000 prompt tokens at 0.002/1k = 0.010000, 400 completion at 0.008/1k = 0.003200
    ensure(ledger.prompt_tokens() == 5000 && ledger.completion_tokens() == 400, || "token totals".into())?;
    let micros = (ledger.total_cost * 1e6).round() as i64;
    ensure(micros == 13_200, || format!("cost {} != 0.013200", ledger.total_cost))?;
    ensure(ledger.per_role[&PromptRole::ActionFilter].calls == 2, || "per-role calls".into())?;
    Ok("SR 7/10, 0/3, 9/10 (mixed manifest); ledger 5400 tokens, $0.013200".into())
}

fn determinism() -> Result<String, String> {
    let entries = manifest("main.json");
    let render = || -> Result<(Vec<u8>, Vec<String>), String> {
        let rows = run_batch(&entries, &BackendChoice::None, &SessionConfig::default(), 4);
        let mut csv = Vec::new();
        write_metrics_csv(&rows, &mut csv, true).map_err(|e| e.to_string())?;
        let outcomes = rows.iter().map(|r| r.outcome.to_json(&r.variant, true).to_string()).collect();
        Ok((csv, outcomes))
    };
    let (first, second) = (render()?, render()?);
    ensure(first.0 == second.0, || "metrics CSV differs between runs".into())?;
    ensure(first.1 == second.1, || "outcome files differ between runs".into())?;
    Ok(format!("{} rows and outcome files byte-identical", entries.len()))
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("fixture-suite completeness", fixture_suite),
        ("oracle equivalence", oracle_equivalence),
        ("pre-exploration state discipline", state_discipline),
        ("filter subset and fallback", filter_subset),
        ("budget enforcement", budget_enforcement),
        ("crash-verification guard", crash_guard),
        ("ablation directionality", ablation_direction),
        ("metrics arithmetic", metrics_arithmetic),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in checks.into_iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
