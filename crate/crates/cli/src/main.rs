//! `tabeval`: evaluate benchmark prediction artifacts from the command
//! line — validation, leaderboards, Elo, win-rate matrices, critical
//! difference data, tuning trajectories, portfolios, and a synthetic
//! store generator.
//!
//! Every subcommand is deterministic given (input bytes, flags, seed):
//! rows have fixed sort orders, markdown uses fixed decimals, and
//! CSV/JSON carry shortest round-trip floats.
//!
//! Exit codes: 0 success; 1 failed validation or analysis error;
//! 2 unusable input (parse/IO/configuration).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tabeval_core::aggregate::{friedman_nemenyi, winrate_matrix, CddReport, NEMENYI_ALPHA};
use tabeval_core::ensemble::DEFAULT_GES_STEPS;
use tabeval_core::error::Error as CoreError;
use tabeval_core::evals::{evaluate_store, impute_missing, EvalTable};
use tabeval_core::leaderboard::{build_leaderboard, Leaderboard, LeaderboardOptions};
use tabeval_core::metrics::dataset_error;
use tabeval_core::rating::DEFAULT_BOOTSTRAP_ROUNDS;
use tabeval_core::simulate::{
    cross_model_ensemble, ensemble_weight_report, evaluate_portfolio, portfolio_learn,
    tuning_trajectory, TrajectoryPoint, DEFAULT_PORTFOLIO_SIZE, DEFAULT_TRAJECTORY_GRID,
    DEFAULT_TRAJECTORY_SAMPLES,
};
use tabeval_core::store::{validate_splits, SplitHole, TaskSpec};
use tabeval_core::synth::{generate, MethodPlan, SynthPlan};
use tabeval_core::{load_store, write_store, MethodKey, Regime, RegimeKey, ResultStore};

/// Schema tag stamped into every JSON payload.
const SCHEMA_VERSION: &str = "1";

#[derive(Parser)]
#[command(
    name = "tabeval",
    version,
    about = "Benchmark-evaluation engine for per-fold prediction artifacts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a store for parse errors and split-coverage holes.
    Validate(CommonArgs),
    /// Full leaderboard: Elo + CI and auxiliary columns per (method, regime).
    Leaderboard(CommonArgs),
    /// Elo ratings and confidence intervals only.
    Elo(CommonArgs),
    /// Pairwise win-rate matrix over (method, regime) rows.
    Winrate(CommonArgs),
    /// Friedman test and Nemenyi critical-difference groups.
    Cdd(CommonArgs),
    /// Tuning trajectories: ensemble error vs. number of sampled configs.
    Trajectory(TrajectoryArgs),
    /// Learn a zeroshot portfolio and score it on a held-out dataset.
    Portfolio(PortfolioArgs),
    /// Generate a synthetic store with planted method qualities.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Store directory (manifest + records files).
    #[arg(long)]
    input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seed for every stochastic step (bootstrap, sampling).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap rounds for Elo confidence intervals (0 = point only).
    #[arg(long = "bootstrap", default_value_t = DEFAULT_BOOTSTRAP_ROUNDS)]
    bootstrap: usize,
    /// Calibration/imputation reference as METHOD/CONFIG; the config
    /// must be `default`.
    #[arg(long, default_value = "RandomForest/default")]
    reference: String,
    /// Fill missing (method, dataset) cells from the reference row.
    #[arg(long)]
    impute: bool,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
    /// Keep only datasets whose id contains this substring.
    #[arg(long)]
    datasets: Option<String>,
    /// Greedy ensemble selection steps.
    #[arg(long = "ges-steps", default_value_t = DEFAULT_GES_STEPS)]
    ges_steps: usize,
    /// Restrict winrate/cdd rows to one regime (leaderboard and elo
    /// always show all three).
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Methods to simulate (repeatable); all methods when omitted.
    #[arg(long = "method")]
    methods: Vec<String>,
    /// Comma-separated config counts; `full` means every config. When
    /// omitted, the default grid clamped to each method's pool plus the
    /// full point.
    #[arg(long)]
    grid: Option<String>,
    /// Random config draws per grid point.
    #[arg(long = "trajectory-samples", default_value_t = DEFAULT_TRAJECTORY_SAMPLES)]
    n_samples: usize,
}

#[derive(Args)]
struct PortfolioArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset held out of portfolio training and used for scoring.
    #[arg(long = "held-out")]
    held_out: String,
    /// Portfolio size cap.
    #[arg(long = "max-size", default_value_t = DEFAULT_PORTFOLIO_SIZE)]
    max_size: usize,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory to write the generated store into.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "n-datasets", default_value_t = 10)]
    n_datasets: usize,
    #[arg(long = "n-samples", default_value_t = 200)]
    n_samples: u64,
    #[arg(long = "noise-scale", default_value_t = 1.0)]
    noise_scale: f64,
    /// Method spec NAME:QUALITY:N_CONFIGS (repeatable); defaults to a
    /// GBM/RandomForest/KNN trio so the default reference exists.
    #[arg(long = "method")]
    methods: Vec<String>,
    /// Binary,multiclass,regression proportions.
    #[arg(long = "task-mix", default_value = "0.5,0.25,0.25")]
    task_mix: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Markdown,
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Default,
    Tuned,
    TunedEnsembled,
}

impl From<RegimeArg> for Regime {
    fn from(arg: RegimeArg) -> Regime {
        match arg {
            RegimeArg::Default => Regime::Default,
            RegimeArg::Tuned => Regime::Tuned,
            RegimeArg::TunedEnsembled => Regime::TunedEnsembled,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code(&err));
        }
    }
}

/// 2 for unusable input (parse, IO, bad configuration), 1 for everything
/// that failed during analysis.
fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::Parse { .. } | CoreError::Io(_) | CoreError::Config(_)) => 2,
        Some(_) => 1,
        None => 2,
    }
}

fn run(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Leaderboard(args) => cmd_leaderboard(&args),
        Command::Elo(args) => cmd_elo(&args),
        Command::Winrate(args) => cmd_winrate(&args),
        Command::Cdd(args) => cmd_cdd(&args),
        Command::Trajectory(args) => cmd_trajectory(&args),
        Command::Portfolio(args) => cmd_portfolio(&args),
        Command::Synth(args) => cmd_synth(&args),
    }
}

// ---------------------------------------------------------------------
// Shared plumbing

fn load_input(args: &CommonArgs) -> anyhow::Result<ResultStore> {
    let store = load_store(&args.input)
        .with_context(|| format!("loading store from {}", args.input.display()))?;
    match &args.datasets {
        None => Ok(store),
        Some(pattern) => {
            let tasks: Vec<TaskSpec> = store
                .tasks()
                .filter(|t| t.dataset_id.contains(pattern.as_str()))
                .cloned()
                .collect();
            if tasks.is_empty() {
                return Err(CoreError::Config(format!(
                    "dataset filter {pattern:?} matched nothing"
                ))
                .into());
            }
            let keep: BTreeSet<&str> = tasks.iter().map(|t| t.dataset_id.as_str()).collect();
            let records = store
                .records()
                .iter()
                .filter(|r| keep.contains(r.dataset_id.as_str()))
                .cloned()
                .collect();
            Ok(ResultStore::new(tasks, records, store.provenance.clone())?)
        }
    }
}

fn parse_reference(spec: &str) -> anyhow::Result<MethodKey> {
    let (method, config_id) = spec
        .split_once('/')
        .ok_or_else(|| CoreError::Config(format!("reference {spec:?} is not METHOD/CONFIG")))?;
    if method.is_empty() || config_id != "default" {
        return Err(CoreError::Config(format!(
            "reference {spec:?} must name a method's default config"
        ))
        .into());
    }
    Ok(MethodKey {
        method: method.to_string(),
        config_id: config_id.to_string(),
    })
}

fn leaderboard_options(args: &CommonArgs) -> anyhow::Result<LeaderboardOptions> {
    Ok(LeaderboardOptions {
        reference: parse_reference(&args.reference)?,
        n_bootstrap: args.bootstrap,
        seed: args.seed,
        impute: args.impute,
        ges_steps: args.ges_steps,
    })
}

/// Test-error table for the matrix/diagram subcommands: evaluated, then
/// imputed if requested, then optionally narrowed to one regime.
fn regime_table(args: &CommonArgs, store: &ResultStore) -> anyhow::Result<EvalTable<RegimeKey>> {
    let reference = parse_reference(&args.reference)?;
    let (test_table, _) = evaluate_store(store, args.ges_steps)?;
    let table = if args.impute {
        impute_missing(
            &test_table,
            &RegimeKey::new(&reference.method, Regime::Default),
        )?
    } else {
        test_table
    };
    match args.regime {
        None => Ok(table),
        Some(which) => {
            let regime: Regime = which.into();
            let mut narrowed = EvalTable::new(table.datasets().to_vec());
            for key in table.keys().filter(|k| k.regime == regime) {
                for dataset in table.datasets() {
                    if let Some(error) = table.error(key, dataset) {
                        narrowed.insert(key.clone(), dataset, error)?;
                    }
                }
            }
            Ok(narrowed)
        }
    }
}

fn write_output(target: &Option<PathBuf>, content: &str) -> anyhow::Result<()> {
    match target {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// Shortest round-trip float text (data formats).
fn num(value: f64) -> String {
    format!("{value}")
}

// ---------------------------------------------------------------------
// validate

#[derive(Serialize)]
struct ValidateJson<'a> {
    schema_version: &'a str,
    n_datasets: usize,
    n_records: usize,
    holes: &'a [SplitHole],
}

fn cmd_validate(args: &CommonArgs) -> anyhow::Result<i32> {
    let store = load_input(args)?;
    let report = validate_splits(&store);
    let mut out = String::new();
    match args.format {
        Format::Json => {
            let payload = ValidateJson {
                schema_version: SCHEMA_VERSION,
                n_datasets: store.n_tasks(),
                n_records: store.records().len(),
                holes: &report.holes,
            };
            out = serde_json::to_string_pretty(&payload)?;
            out.push('\n');
        }
        Format::Markdown | Format::Csv => {
            if report.is_complete() {
                writeln!(
                    out,
                    "ok: {} datasets, {} records, no holes",
                    store.n_tasks(),
                    store.records().len()
                )?;
            } else {
                for hole in &report.holes {
                    let splits: Vec<String> = hole
                        .missing
                        .iter()
                        .map(|(r, f)| format!("(r{r}, f{f})"))
                        .collect();
                    writeln!(
                        out,
                        "hole: {}/{} missing {}",
                        hole.dataset_id,
                        hole.method,
                        splits.join(" ")
                    )?;
                }
                writeln!(out, "{} incomplete record group(s)", report.holes.len())?;
            }
        }
    }
    write_output(&args.output, &out)?;
    Ok(if report.is_complete() { 0 } else { 1 })
}

// ---------------------------------------------------------------------
// leaderboard / elo

#[derive(Serialize)]
struct LeaderboardJson<'a> {
    schema_version: &'a str,
    reference: String,
    n_datasets: usize,
    n_bootstrap: usize,
    seed: u64,
    rows: Vec<RowJson>,
}

#[derive(Serialize)]
struct RowJson {
    method: String,
    regime: String,
    elo: f64,
    ci_lo: f64,
    ci_hi: f64,
    mean_error: f64,
    normalized_score: f64,
    avg_rank: f64,
    harmonic_mean_rank: f64,
    n_wins: f64,
    improvability_pct: f64,
    imputed_count: usize,
}

fn leaderboard_json(board: &Leaderboard) -> LeaderboardJson<'_> {
    LeaderboardJson {
        schema_version: SCHEMA_VERSION,
        reference: board.reference.to_string(),
        n_datasets: board.n_datasets,
        n_bootstrap: board.n_bootstrap,
        seed: board.seed,
        rows: board
            .rows
            .iter()
            .map(|r| RowJson {
                method: r.key.method.clone(),
                regime: r.key.regime.tag().to_string(),
                elo: r.elo,
                ci_lo: r.ci.0,
                ci_hi: r.ci.1,
                mean_error: r.mean_error,
                normalized_score: r.normalized_score,
                avg_rank: r.avg_rank,
                harmonic_mean_rank: r.harmonic_mean_rank,
                n_wins: r.n_wins,
                improvability_pct: r.improvability_pct,
                imputed_count: r.imputed_count,
            })
            .collect(),
    }
}

fn cmd_leaderboard(args: &CommonArgs) -> anyhow::Result<i32> {
    let store = load_input(args)?;
    let board = build_leaderboard(&store, &leaderboard_options(args)?)?;
    let mut out = String::new();
    match args.format {
        Format::Json => {
            out = serde_json::to_string_pretty(&leaderboard_json(&board))?;
            out.push('\n');
        }
        Format::Csv => {
            writeln!(
                out,
                "method,regime,elo,ci_lo,ci_hi,mean_error,normalized_score,avg_rank,harmonic_mean_rank,n_wins,improvability_pct,imputed_count"
            )?;
            for r in &board.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    csv_field(&r.key.method),
                    r.key.regime.tag(),
                    num(r.elo),
                    num(r.ci.0),
                    num(r.ci.1),
                    num(r.mean_error),
                    num(r.normalized_score),
                    num(r.avg_rank),
                    num(r.harmonic_mean_rank),
                    num(r.n_wins),
                    num(r.improvability_pct),
                    r.imputed_count
                )?;
            }
        }
        Format::Markdown => {
            writeln!(
                out,
                "Leaderboard over {} datasets (reference {}, {} bootstrap rounds, seed {})",
                board.n_datasets, board.reference, board.n_bootstrap, board.seed
            )?;
            writeln!(out)?;
            writeln!(
                out,
                "| method | regime | elo | 95% CI | mean err | norm. score | avg rank | harm. rank | #wins | improv. % | imputed |"
            )?;
            writeln!(
                out,
                "|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|"
            )?;
            for r in &board.rows {
                writeln!(
                    out,
                    "| {} | {} | {:.1} | [{:.1}, {:.1}] | {:.4} | {:.3} | {:.2} | {:.2} | {:.2} | {:.1} | {} |",
                    r.key.method,
                    r.key.regime.short(),
                    r.elo,
                    r.ci.0,
                    r.ci.1,
                    r.mean_error,
                    r.normalized_score,
                    r.avg_rank,
                    r.harmonic_mean_rank,
                    r.n_wins,
                    r.improvability_pct,
                    r.imputed_count
                )?;
            }
        }
    }
    write_output(&args.output, &out)?;
    Ok(0)
}

#[derive(Serialize)]
struct EloJson<'a> {
    schema_version: &'a str,
    reference: String,
    n_bootstrap: usize,
    seed: u64,
    rows: Vec<EloRowJson>,
}

#[derive(Serialize)]
struct EloRowJson {
    method: String,
    regime: String,
    elo: f64,
    ci_lo: f64,
    ci_hi: f64,
}

fn cmd_elo(args: &CommonArgs) -> anyhow::Result<i32> {
    let store = load_input(args)?;
    let board = build_leaderboard(&store, &leaderboard_options(args)?)?;
    let mut out = String::new();
    match args.format {
        Format::Json => {
            let payload = EloJson {
                schema_version: SCHEMA_VERSION,
                reference: board.reference.to_string(),
                n_bootstrap: board.n_bootstrap,
                seed: board.seed,
                rows: board
                    .rows
                    .iter()
                    .map(|r| EloRowJson {
                        method: r.key.method.clone(),
                        regime: r.key.regime.tag().to_string(),
                        elo: r.elo,
                        ci_lo: r.ci.0,
                        ci_hi: r.ci.1,
                    })
                    .collect(),
            };
            out = serde_json::to_string_pretty(&payload)?;
            out.push('\n');
        }
        Format::Csv => {
            writeln!(out, "method,regime,elo,ci_lo,ci_hi")?;
            for r in &board.rows {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    csv_field(&r.key.method),
                    r.key.regime.tag(),
                    num(r.elo),
                    num(r.ci.0),
                    num(r.ci.1)
                )?;
            }
        }
        Format::Markdown => {
            writeln!(out, "| method | regime | elo | 95% CI |")?;
            writeln!(out, "|---|---|---:|---:|")?;
            for r in &board.rows {
                writeln!(
                    out,
                    "| {} | {} | {:.1} | [{:.1}, {:.1}] |",
                    r.key.method,
                    r.key.regime.short(),
                    r.elo,
                    r.ci.0,
                    r.ci.1
                )?;
            }
        }
    }
    write_output(&args.output, &out)?;
    Ok(0)
}

// ---------------------------------------------------------------------
// winrate / cdd

#[derive(Serialize)]
struct WinrateJson<'a> {
    schema_version: &'a str,
    keys: Vec<String>,
    values: Vec<Vec<f64>>,
}

fn cmd_winrate(args: &CommonArgs) -> anyhow::Result<i32> {
    let store = load_input(args)?;
    let table = regime_table(args, &store)?;
    let matrix = winrate_matrix(&table)?;
    let keys: Vec<String> = matrix.keys.iter().map(|k| k.to_string()).collect();
    let mut out = String::new();
    match args.format {
        Format::Json => {
            let payload = WinrateJson {
                schema_version: SCHEMA_VERSION,
                keys: keys.clone(),
                values: matrix.values.clone(),
            };
            out = serde_json::to_string_pretty(&payload)?;
            out.push('\n');
        }
        Format::Csv => {
            let header: Vec<String> = keys.iter().map(|k| csv_field(k)).collect();
            writeln!(out, "key,{}", header.join(","))?;
            for (key, row) in keys.iter().zip(&matrix.values) {
                let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
                writeln!(out, "{},{}", csv_field(key), cells.join(","))?;
            }
        }
        Format::Markdown => {
            writeln!(out, "| vs | {} |", keys.join(" | "))?;
            let rule: Vec<&str> = std::iter::repeat_n("---:", keys.len()).collect();
            writeln!(out, "|---|{}|", rule.join("|"))?;
            for (key, row) in keys.iter().zip(&matrix.values) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
                writeln!(out, "| {} | {} |", key, cells.join(" | "))?;
            }
        }
    }
    write_output(&args.output, &out)?;
    Ok(0)
}

#[derive(Serialize)]
struct CddJson<'a> {
    schema_version: &'a str,
    n_methods: usize,
    n_datasets: usize,
    chi2: f64,
    p_value: f64,
    critical_distance: f64,
    avg_ranks: Vec<(String, f64)>,
    groups: Vec<Vec<String>>,
}

fn cdd_json<'a>(report: &CddReport<RegimeKey>) -> CddJson<'a> {
    CddJson {
        schema_version: SCHEMA_VERSION,
        n_methods: report.n_methods,
        n_datasets: report.n_datasets,
        chi2: report.chi2,
        p_value: report.p_value,
        critical_distance: report.critical_distance,
        avg_ranks: report
            .avg_ranks
            .iter()
            .map(|(k, r)| (k.to_string(), *r))
            .collect(),
        groups: report
            .groups
            .iter()
            .map(|g| g.iter().map(|k| k.to_string()).collect())
            .collect(),
    }
}

fn cmd_cdd(args: &CommonArgs) -> anyhow::Result<i32> {
    let store = load_input(args)?;
    let table = regime_table(args, &store)?;
    let report = friedman_nemenyi(&table, NEMENYI_ALPHA)?;
    let mut out = String::new();
    match args.format {
        Format::Json => {
            out = serde_json::to_string_pretty(&cdd_json(&report))?;
            out.push('\n');
        }
        Format::Csv => {
            writeln!(out, "key,avg_rank,group")?;
            for (key, rank) in &report.avg_ranks {
                let group = report
                    .groups
                    .iter()
                    .position(|g| g.contains(key))
                    .expect("every key is grouped");
                writeln!(
                    out,
                    "{},{},{}",
                    csv_field(&key.to_string()),
                    num(*rank),
                    group
                )?;
            }
        }
        Format::Markdown => {
            writeln!(
                out,
                "Friedman χ² = {:.4}, p = {:.6}, Nemenyi CD = {:.4} ({} methods, {} datasets)",
                report.chi2,
                report.p_value,
                report.critical_distance,
                report.n_methods,
                report.n_datasets
            )?;
            writeln!(out)?;
            writeln!(out, "| key | avg rank | group |")?;
            writeln!(out, "|---|---:|---:|")?;
            for (key, rank) in &report.avg_ranks {
                let group = report
                    .groups
                    .iter()
                    .position(|g| g.contains(key))
                    .expect("every key is grouped");
                writeln!(out, "| {key} | {rank:.3} | {group} |")?;
            }
        }
    }
    write_output(&args.output, &out)?;
    Ok(0)
}

// ---------------------------------------------------------------------
// trajectory

enum GridToken {
    N(usize),
    Full,
}

impl FromStr for GridToken {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            Ok(GridToken::Full)
        } else {
            s.parse::<usize>()
                .map(GridToken::N)
                .map_err(|_| CoreError::Config(format!("bad grid token {s:?}")))
        }
    }
}

/// Concrete grid for one method: explicit tokens resolve `full` to the
/// pool size; the default grid keeps its points below the pool size and
/// always appends the full point.
fn resolve_grid(tokens: &Option<Vec<GridToken>>, total: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = match tokens {
        Some(tokens) => tokens
            .iter()
            .map(|t| match t {
                GridToken::N(n) => *n,
                GridToken::Full => total,
            })
            .collect(),
        None => DEFAULT_TRAJECTORY_GRID
            .iter()
            .copied()
            .filter(|&n| n < total)
            .chain([total])
            .collect(),
    };
    grid.sort_unstable();
    grid.dedup();
    grid
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    schema_version: &'a str,
    seed: u64,
    n_samples: usize,
    ges_steps: usize,
    methods: Vec<MethodTrajectoryJson>,
}

#[derive(Serialize)]
struct MethodTrajectoryJson {
    method: String,
    points: Vec<PointJson>,
}

#[derive(Serialize)]
struct PointJson {
    n_configs: usize,
    mean_test_error: f64,
    mean_val_error: f64,
    test_errors: std::collections::BTreeMap<String, f64>,
    val_errors: std::collections::BTreeMap<String, f64>,
}

fn point_json(point: &TrajectoryPoint) -> anyhow::Result<PointJson> {
    let tests: Vec<f64> = point.test_errors.values().copied().collect();
    let vals: Vec<f64> = point.val_errors.values().copied().collect();
    Ok(PointJson {
        n_configs: point.n_configs,
        mean_test_error: dataset_error(&tests)?,
        mean_val_error: dataset_error(&vals)?,
        test_errors: point.test_errors.clone(),
        val_errors: point.val_errors.clone(),
    })
}

fn cmd_trajectory(args: &TrajectoryArgs) -> anyhow::Result<i32> {
    let store = load_input(&args.common)?;
    let methods = if args.methods.is_empty() {
        store.methods()
    } else {
        args.methods.clone()
    };
    let tokens = match &args.grid {
        None => None,
        Some(spec) => Some(
            spec.split(',')
                .map(GridToken::from_str)
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };

    let mut rendered = Vec::with_capacity(methods.len());
    for method in &methods {
        // Pool size = configs shared by every dataset the method covers.
        let mut pool: Option<BTreeSet<String>> = None;
        for dataset in store.dataset_ids() {
            let configs = store.configs(&dataset, method);
            if configs.is_empty() {
                continue;
            }
            let here: BTreeSet<String> = configs.into_iter().collect();
            pool = Some(match pool {
                None => here,
                Some(prev) => prev.intersection(&here).cloned().collect(),
            });
        }
        let total = pool.map_or(0, |p| p.len());
        if total == 0 {
            return Err(CoreError::Missing(format!("method {method} has no records")).into());
        }
        let grid = resolve_grid(&tokens, total);
        let points = tuning_trajectory(
            &store,
            method,
            &grid,
            args.n_samples,
            args.common.seed,
            args.common.ges_steps,
        )?;
        let points = points
            .iter()
            .map(point_json)
            .collect::<anyhow::Result<Vec<_>>>()?;
        rendered.push(MethodTrajectoryJson {
            method: method.clone(),
            points,
        });
    }

    let mut out = String::new();
    match args.common.format {
        Format::Json => {
            let payload = TrajectoryJson {
                schema_version: SCHEMA_VERSION,
                seed: args.common.seed,
                n_samples: args.n_samples,
                ges_steps: args.common.ges_steps,
                methods: rendered,
            };
            out = serde_json::to_string_pretty(&payload)?;
            out.push('\n');
        }
        Format::Csv => {
            writeln!(out, "method,n_configs,mean_test_error,mean_val_error")?;
            for m in &rendered {
                for p in &m.points {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        csv_field(&m.method),
                        p.n_configs,
                        num(p.mean_test_error),
                        num(p.mean_val_error)
                    )?;
                }
            }
        }
        Format::Markdown => {
            writeln!(out, "| method | n configs | mean test err | mean val err |")?;
            writeln!(out, "|---|---:|---:|---:|")?;
            for m in &rendered {
                for p in &m.points {
                    writeln!(
                        out,
                        "| {} | {} | {:.4} | {:.4} |",
                        m.method, p.n_configs, p.mean_test_error, p.mean_val_error
                    )?;
                }
            }
        }
    }
    write_output(&args.common.output, &out)?;
    Ok(0)
}

// ---------------------------------------------------------------------
// portfolio

#[derive(Serialize)]
struct PortfolioJson<'a> {
    schema_version: &'a str,
    held_out: String,
    max_size: usize,
    entries: Vec<String>,
    objective_trace: Vec<f64>,
    training_datasets: Vec<String>,
    portfolio_ensemble: EnsembleJson,
    full_ensemble: EnsembleJson,
    weight_report: std::collections::BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct EnsembleJson {
    mean_test_error: f64,
    mean_val_error: f64,
    test_errors: Vec<f64>,
    val_errors: Vec<f64>,
}

fn cmd_portfolio(args: &PortfolioArgs) -> anyhow::Result<i32> {
    let store = load_input(&args.common)?;
    let portfolio = portfolio_learn(&store, args.max_size, &args.held_out)?;
    let on_held_out =
        evaluate_portfolio(&store, &portfolio, &args.held_out, args.common.ges_steps)?;
    let full = cross_model_ensemble(&store, &args.held_out, None, args.common.ges_steps)?;
    let weights = ensemble_weight_report(std::slice::from_ref(&on_held_out))?;

    let ensemble_json =
        |e: &tabeval_core::simulate::CrossEnsembleEval| -> anyhow::Result<EnsembleJson> {
            Ok(EnsembleJson {
                mean_test_error: e.mean_test_error()?,
                mean_val_error: e.mean_val_error()?,
                test_errors: e.test_errors.clone(),
                val_errors: e.val_errors.clone(),
            })
        };
    let portfolio_ensemble = ensemble_json(&on_held_out)?;
    let full_ensemble = ensemble_json(&full)?;
    let entries: Vec<String> = portfolio.entries.iter().map(|k| k.to_string()).collect();

    let mut out = String::new();
    match args.common.format {
        Format::Json => {
            let payload = PortfolioJson {
                schema_version: SCHEMA_VERSION,
                held_out: args.held_out.clone(),
                max_size: args.max_size,
                entries,
                objective_trace: portfolio.objective_trace.clone(),
                training_datasets: portfolio.training_datasets.clone(),
                portfolio_ensemble,
                full_ensemble,
                weight_report: weights,
            };
            out = serde_json::to_string_pretty(&payload)?;
            out.push('\n');
        }
        Format::Csv => {
            writeln!(out, "kind,mean_test_error,mean_val_error")?;
            writeln!(
                out,
                "portfolio,{},{}",
                num(portfolio_ensemble.mean_test_error),
                num(portfolio_ensemble.mean_val_error)
            )?;
            writeln!(
                out,
                "full_ensemble,{},{}",
                num(full_ensemble.mean_test_error),
                num(full_ensemble.mean_val_error)
            )?;
            writeln!(out)?;
            writeln!(out, "position,entry")?;
            for (i, entry) in entries.iter().enumerate() {
                writeln!(out, "{},{}", i + 1, csv_field(entry))?;
            }
        }
        Format::Markdown => {
            writeln!(
                out,
                "Portfolio of {} (cap {}) trained without {}",
                entries.len(),
                args.max_size,
                args.held_out
            )?;
            writeln!(out)?;
            writeln!(out, "| kind | mean test err | mean val err |")?;
            writeln!(out, "|---|---:|---:|")?;
            writeln!(
                out,
                "| portfolio | {:.4} | {:.4} |",
                portfolio_ensemble.mean_test_error, portfolio_ensemble.mean_val_error
            )?;
            writeln!(
                out,
                "| full ensemble | {:.4} | {:.4} |",
                full_ensemble.mean_test_error, full_ensemble.mean_val_error
            )?;
            writeln!(out)?;
            for (i, entry) in entries.iter().enumerate() {
                writeln!(out, "{}. {}", i + 1, entry)?;
            }
        }
    }
    write_output(&args.common.output, &out)?;
    Ok(0)
}

// ---------------------------------------------------------------------
// synth

fn parse_method_spec(spec: &str) -> anyhow::Result<MethodPlan> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || {
        CoreError::Config(format!(
            "method spec {spec:?} is not NAME:QUALITY:N_CONFIGS"
        ))
    };
    if parts.len() != 3 || parts[0].is_empty() {
        bail!(bad());
    }
    let quality: f64 = parts[1].parse().map_err(|_| bad())?;
    let n_configs: usize = parts[2].parse().map_err(|_| bad())?;
    Ok(MethodPlan {
        name: parts[0].to_string(),
        quality,
        n_configs,
    })
}

fn parse_task_mix(spec: &str) -> anyhow::Result<(f64, f64, f64)> {
    let parts: Vec<&str> = spec.split(',').collect();
    let bad = || CoreError::Config(format!("task mix {spec:?} is not B,M,R"));
    if parts.len() != 3 {
        bail!(bad());
    }
    let mut mix = [0.0; 3];
    for (slot, part) in mix.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|_| bad())?;
    }
    Ok((mix[0], mix[1], mix[2]))
}

fn cmd_synth(args: &SynthArgs) -> anyhow::Result<i32> {
    let defaults = SynthPlan::default();
    let methods = if args.methods.is_empty() {
        defaults.methods
    } else {
        args.methods
            .iter()
            .map(|spec| parse_method_spec(spec))
            .collect::<anyhow::Result<Vec<_>>>()?
    };
    let plan = SynthPlan {
        seed: args.seed,
        n_datasets: args.n_datasets,
        task_mix: parse_task_mix(&args.task_mix)?,
        methods,
        n_samples: args.n_samples,
        noise_scale: args.noise_scale,
    };
    let store = generate(&plan)?;
    fs::create_dir_all(&args.output)
        .with_context(|| format!("creating {}", args.output.display()))?;
    write_store(&store, &args.output)?;
    println!(
        "wrote {} records across {} datasets to {}",
        store.records().len(),
        store.n_tasks(),
        args.output.display()
    );
    Ok(0)
}
