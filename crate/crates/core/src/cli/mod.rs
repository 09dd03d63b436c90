//! Command-line entry points.
//!
//! Exit codes: 0 success, 1 error, 2 session finished without success,
//! 3 oracle found no path, 64 usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::device::{SimApp, SimDevice};
use crate::gateway::{Gateway, HttpBackend, HttpConfig, MockBackend, PriceTable, API_KEY_ENV};
use crate::orchestrator::{
    brute_force_oracle, compute_sr, load_manifest, reproduce, run_batch, write_metrics_csv, Ablation, BackendChoice,
    BatchError, OutcomeKind, SessionConfig,
};
use crate::report::load_report;
use crate::ui::UIAction;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_REPRODUCED: i32 = 2;
pub const EXIT_UNREACHABLE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "droidrepro", version, about = "Reproduce GUI app bugs from plain-text bug reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reproduce one bug report against one app model.
    Reproduce(ReproduceArgs),
    /// Run every session listed in a manifest.
    Batch(BatchArgs),
    /// Run a batch with one ablation variant enabled.
    Ablate {
        #[arg(long, value_parser = parse_variant)]
        variant: Ablation,
        #[command(flatten)]
        batch: BatchArgs,
    },
    /// Print a shortest action sequence triggering a bug, by exhaustive search.
    Oracle {
        #[arg(long)]
        app: PathBuf,
        /// Defaults to the ground-truth bug, or the only bug of the app.
        #[arg(long)]
        bug: Option<String>,
        #[arg(long, default_value_t = 15)]
        max_depth: usize,
    },
    /// Load and check an app model.
    ValidateApp {
        #[arg(long)]
        app: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct BackendArgs {
    /// Scripted mock backend.
    #[arg(long, conflicts_with_all = ["endpoint", "model"])]
    mock: Option<PathBuf>,
    /// OpenAI-compatible endpoint; the key is read from OPENAI_API_KEY.
    #[arg(long, requires = "model")]
    endpoint: Option<String>,
    #[arg(long, requires = "endpoint")]
    model: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct BudgetArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    max_actions: u64,
    #[arg(long, default_value_t = 60.0, value_parser = parse_minutes)]
    max_minutes: f64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    beam: u64,
    /// JSON price table: {"prompt_per_1k": .., "completion_per_1k": ..}.
    #[arg(long)]
    prices: Option<PathBuf>,
    /// Zero wall-time fields so outputs compare byte for byte.
    #[arg(long)]
    normalize_output: bool,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    app: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Outcome file; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ablations to enable, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    ablate: Vec<Ablation>,
}

#[derive(Args, Debug, Clone)]
struct BatchArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_csv: PathBuf,
    /// Directory receiving one outcome file per session.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    parallel: u64,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    budget: BudgetArgs,
}

fn parse_variant(s: &str) -> Result<Ablation, String> {
    s.parse()
}

fn parse_minutes(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("{s:?} is not a positive number of minutes")),
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn error(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_ERROR, message: message.into() }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match cli.command {
        Command::Reproduce(args) => cmd_reproduce(args),
        Command::Batch(args) => cmd_batch(args, None),
        Command::Ablate { variant, batch } => cmd_batch(batch, Some(variant)),
        Command::Oracle { app, bug, max_depth } => cmd_oracle(&app, bug.as_deref(), max_depth),
        Command::ValidateApp { app } => cmd_validate(&app),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("droidrepro: {}", f.message);
            f.code
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

fn session_config(budget: &BudgetArgs, ablations: impl IntoIterator<Item = Ablation>) -> Result<SessionConfig, Failure> {
    let prices = match &budget.prices {
        Some(path) => {
            require_file(path, "price table")?;
            PriceTable::load(path).map_err(error)?
        }
        None => PriceTable::default(),
    };
    Ok(SessionConfig {
        max_actions: budget.max_actions,
        max_minutes: budget.max_minutes,
        beam: budget.beam as usize,
        ablations: ablations.into_iter().collect(),
        prices,
        ..SessionConfig::default()
    })
}

fn backend_choice(args: &BackendArgs) -> Result<BackendChoice, Failure> {
    match (&args.mock, &args.endpoint, &args.model) {
        (Some(mock), _, _) => {
            require_file(mock, "mock script")?;
            Ok(BackendChoice::Mock(mock.clone()))
        }
        (None, Some(endpoint), Some(model)) => {
            let config = HttpConfig::new(endpoint.clone(), model.clone());
            if config.api_key.is_none() {
                eprintln!("droidrepro: warning: {API_KEY_ENV} is not set; sending requests without a key");
            }
            Ok(BackendChoice::Http(config))
        }
        _ => Ok(BackendChoice::None),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("outcome serializes") + "\n";
    std::fs::write(path, text).map_err(|e| error(format!("cannot write {}: {e}", path.display())))
}

fn cmd_reproduce(args: ReproduceArgs) -> Result<i32, Failure> {
    require_file(&args.report, "report")?;
    require_file(&args.app, "app model")?;
    let config = session_config(&args.budget, args.ablate.iter().copied())?;
    let gateway = match backend_choice(&args.backend)? {
        BackendChoice::Mock(path) => {
            Gateway::new(MockBackend::load(&path).map_err(|e| error(e.to_string()))?, config.prices)
        }
        BackendChoice::Http(http) => Gateway::new(HttpBackend::new(http), config.prices),
        BackendChoice::None => return Err(usage("select a backend with --mock or --endpoint/--model")),
    };
    let report = load_report(&args.report).map_err(|e| error(e.to_string()))?;
    let app = SimApp::load(&args.app).map_err(|e| error(e.to_string()))?;
    let mut device = SimDevice::new(Arc::new(app));

    let outcome = reproduce(&report, &mut device, &gateway, &config);
    let json = outcome.to_json(&config.variant(), args.budget.normalize_output);
    match &args.out {
        Some(path) => write_json(path, &json)?,
        None => println!("{}", serde_json::to_string_pretty(&json).expect("outcome serializes")),
    }
    if let Some(message) = &outcome.metrics.error {
        eprintln!("droidrepro: session error: {message}");
    }
    Ok(match outcome.outcome() {
        OutcomeKind::Success => EXIT_OK,
        OutcomeKind::Error => EXIT_ERROR,
        _ => EXIT_NOT_REPRODUCED,
    })
}

fn cmd_batch(args: BatchArgs, variant: Option<Ablation>) -> Result<i32, Failure> {
    require_file(&args.manifest, "manifest")?;
    let entries = load_manifest(&args.manifest).map_err(|e| match e {
        BatchError::EmptyManifest(_) => usage(e.to_string()),
        BatchError::Manifest { .. } => error(e.to_string()),
    })?;
    let config = session_config(&args.budget, variant)?;
    let backend = backend_choice(&args.backend)?;
    if matches!(backend, BackendChoice::None) && entries.iter().any(|e| e.mock.is_none()) {
        return Err(usage("some manifest rows have no mock script; select a backend with --mock or --endpoint/--model"));
    }

    let rows = run_batch(&entries, &backend, &config, args.parallel as usize);

    let file = File::create(&args.out_csv).map_err(|e| error(format!("cannot write {}: {e}", args.out_csv.display())))?;
    write_metrics_csv(&rows, BufWriter::new(file), args.budget.normalize_output)
        .map_err(|e| error(format!("cannot write {}: {e}", args.out_csv.display())))?;
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| error(format!("cannot create {}: {e}", dir.display())))?;
        for (i, row) in rows.iter().enumerate() {
            let name = format!("{:03}-{}.json", i + 1, row.outcome.report_id);
            write_json(&dir.join(name), &row.outcome.to_json(&row.variant, args.budget.normalize_output))?;
        }
    }
    for row in &rows {
        if let Some(message) = &row.outcome.metrics.error {
            eprintln!("droidrepro: {}: {message}", row.outcome.report_id);
        }
    }
    let outcomes: Vec<_> = rows.into_iter().map(|r| r.outcome).collect();
    let sr = compute_sr(&outcomes).map_err(|e| usage(e.to_string()))?;
    let successes = outcomes.iter().filter(|o| o.outcome() == OutcomeKind::Success).count();
    println!("SR {sr:.4} ({successes}/{})", outcomes.len());
    Ok(EXIT_OK)
}

fn cmd_oracle(app_path: &Path, bug: Option<&str>, max_depth: usize) -> Result<i32, Failure> {
    require_file(app_path, "app model")?;
    let app = SimApp::load(app_path).map_err(|e| error(e.to_string()))?;
    let bug_id = match bug {
        Some(id) => id.to_owned(),
        None => match (&app.ground_truth, app.bugs.as_slice()) {
            (Some(gt), _) => gt.bug_id.clone(),
            (None, [only]) => only.bug_id.clone(),
            (None, []) => return Err(error("the app declares no bugs")),
            _ => return Err(usage("the app has several bugs; choose one with --bug")),
        },
    };
    if app.bug(&bug_id).is_none() {
        return Err(usage(format!("the app has no bug {bug_id:?}")));
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match brute_force_oracle(&app, &bug_id, max_depth) {
        Some(trace) => {
            print_trace(&mut out, &app, &trace);
            let _ = writeln!(out, "length {}", trace.len());
            Ok(EXIT_OK)
        }
        None => {
            let _ = writeln!(out, "unreachable");
            Ok(EXIT_UNREACHABLE)
        }
    }
}

/// One line per step: the action as JSON, then its description.
fn print_trace(out: &mut impl Write, app: &SimApp, trace: &[UIAction]) {
    let mut config = app.initial_config();
    for (i, action) in trace.iter().enumerate() {
        let tree = &app.state(&config.state).hierarchy;
        let json = serde_json::to_string(action).expect("actions serialize");
        let _ = writeln!(out, "{}. {json}  # {}", i + 1, action.describe(tree));
        config = app.step(&config, action).unwrap_or(config);
    }
}

fn cmd_validate(app_path: &Path) -> Result<i32, Failure> {
    require_file(app_path, "app model")?;
    let app = SimApp::load(app_path).map_err(|e| error(e.to_string()))?;
    println!(
        "{}: {} states, {} rules, {} bugs",
        app.app_name,
        app.states.len(),
        app.rules.len(),
        app.bugs.len()
    );
    Ok(EXIT_OK)
}
