//! Command-line entry point: `stopdeck <simulate|train|evaluate|compare|report>
//! --config FILE [--set key=value]... [--seed U64] [--threads N] [--out DIR]`.
//!
//! Every run writes the fully resolved configuration (`resolved.cfg`)
//! alongside its outputs; re-running from that file reproduces the outputs
//! byte for byte at any thread count. Exit codes: 0 success, 1 config
//! error, 2 runtime failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{self, ComparisonRow, EvalStats, NamedSeries, ReportFormat};
use crate::config::{parse_config_with_overrides, ExperimentConfig};
use crate::datafeed::{load_prices, split, to_returns, ReturnSeries};
use crate::deepstop::{self, TrainedPolicy};
use crate::error::{Error, Result};
use crate::lsmc;
use crate::market::PathBatch;
use crate::rng;
use crate::simulate::{generate, GeneratorSpec};

/// Fallback output directory when neither `--out` nor `output.dir` is set.
pub const OUT_ENV: &str = "STOPDECK_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "stopdeck",
    about = "Learn and benchmark option-exercise stopping policies",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate paths and write their summary statistics.
    Simulate(RunArgs),
    /// Train a stopping policy; writes a checkpoint and an epoch trace.
    Train(RunArgs),
    /// Evaluate a saved policy on fresh paths; writes stats as JSON.
    Evaluate(RunArgs),
    /// Train the policy, fit the baseline, evaluate both on shared
    /// held-out paths, and write a one-row comparison.
    Compare(RunArgs),
    /// Aggregate comparison rows into sector tables and a summary.
    Report(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config key, e.g. --set training.epochs=50 (last wins).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Override evaluation.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cap the worker-thread count; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory (overrides output.dir and STOPDECK_OUT).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Binary entry point; returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            return 1;
        }
    };
    run(cli.command)
}

/// Runs one subcommand, mapping failures to exit codes and a single-line
/// stderr report.
pub fn run(command: Command) -> i32 {
    let result = match &command {
        Command::Simulate(args) => dispatch(args, Mode::Simulate),
        Command::Train(args) => dispatch(args, Mode::Train),
        Command::Evaluate(args) => dispatch(args, Mode::Evaluate),
        Command::Compare(args) => dispatch(args, Mode::Compare),
        Command::Report(args) => dispatch(args, Mode::Report),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Simulate,
    Train,
    Evaluate,
    Compare,
    Report,
}

fn dispatch(args: &RunArgs, mode: Mode) -> Result<()> {
    let mut overrides = Vec::with_capacity(args.set.len());
    for s in &args.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    let mut cfg = parse_config_with_overrides(&args.config, &overrides)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg.seed_explicit = true;
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var(OUT_ENV).ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let body = || -> Result<()> {
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
        std::fs::write(out_dir.join("resolved.cfg"), cfg.resolved_text(&out_dir))
            .map_err(|e| Error::io("writing resolved.cfg", e))?;
        match mode {
            Mode::Simulate => run_simulate(&cfg, &out_dir),
            Mode::Train => run_train(&cfg, &out_dir),
            Mode::Evaluate => run_evaluate(&cfg, &out_dir),
            Mode::Compare => run_compare(&cfg, &out_dir),
            Mode::Report => run_report(&cfg, &out_dir),
        }
    };
    match args.threads {
        None => body(),
        Some(n) => {
            if n == 0 {
                return Err(Error::Config("--threads must be >= 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
            pool.install(body)
        }
    }
}

/// Return-series segments for the bootstrap generator: the full series plus
/// the chronological train/validation/test split.
struct DataSegments {
    full: ReturnSeries,
    train: ReturnSeries,
    test: ReturnSeries,
}

fn load_segments(cfg: &ExperimentConfig) -> Result<Option<DataSegments>> {
    let Some(data) = &cfg.data else {
        return Ok(None);
    };
    let prices = load_prices(&data.csv)?;
    let label = data
        .csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    let full = to_returns(&prices, label)?;
    let (train, _val, test) = split(&full, &data.split)?;
    Ok(Some(DataSegments { full, train, test }))
}

fn generator_for(cfg: &ExperimentConfig, source: Option<ReturnSeries>) -> Result<GeneratorSpec> {
    cfg.build_generator(source)
}

fn eval_seed(cfg: &ExperimentConfig) -> u64 {
    rng::derive_seed(cfg.seed, rng::STREAM_EVAL, 0)
}

fn fit_seed(cfg: &ExperimentConfig) -> u64 {
    rng::derive_seed(cfg.seed, rng::STREAM_FIT, 0)
}

fn run_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let segments = load_segments(cfg)?;
    // raw generator inspection draws from the full series
    let gen = generator_for(cfg, segments.map(|s| s.full))?;
    let paths = generate(&gen, &cfg.market, cfg.eval_paths, cfg.seed)?;
    let n = paths.steps();
    let terminal: Vec<f64> = (0..paths.batch()).map(|i| paths.price(i, n)).collect();
    let stats = EvalStats::from_samples(&terminal);
    #[derive(Serialize)]
    struct SimulateSummary {
        generator: String,
        batch: usize,
        steps: usize,
        dt: f64,
        seed: u64,
        terminal_mean: f64,
        terminal_std: f64,
        terminal_min: f64,
        terminal_max: f64,
    }
    let summary = SimulateSummary {
        generator: gen.tag().to_string(),
        batch: paths.batch(),
        steps: n,
        dt: paths.dt(),
        seed: cfg.seed,
        terminal_mean: stats.mean,
        terminal_std: stats.std,
        terminal_min: terminal.iter().cloned().fold(f64::INFINITY, f64::min),
        terminal_max: terminal.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    };
    write_json(&out_dir.join("simulate_summary.json"), &summary)?;
    println!(
        "simulated {} {} paths of {} steps: terminal mean {:.6}",
        paths.batch(),
        gen.tag(),
        n,
        stats.mean
    );
    Ok(())
}

fn train_policy(cfg: &ExperimentConfig, segments: &Option<DataSegments>) -> Result<TrainedPolicy> {
    let source = segments.as_ref().map(|s| s.train.clone());
    let gen = generator_for(cfg, source)?;
    deepstop::train(&gen, &cfg.market, &cfg.training, cfg.seed)
}

fn run_train(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let segments = load_segments(cfg)?;
    let policy = train_policy(cfg, &segments)?;
    policy.save(&out_dir.join("policy.ckpt"))?;
    bench::write_epoch_trace(&out_dir.join("epoch_trace.csv"), &policy.trace)?;
    if let Some(last) = policy.trace.last() {
        println!(
            "trained {} epochs: training payoff {:.6}, loss {:.6}",
            policy.trace.len(),
            last.mean_payoff,
            last.loss
        );
    } else {
        println!("trained 0 epochs: checkpoint holds the initialized network");
    }
    Ok(())
}

/// Evaluation paths come from the test segment for bootstrap data, so a
/// trained policy is always scored out-of-sample.
fn eval_paths(cfg: &ExperimentConfig, segments: &Option<DataSegments>) -> Result<PathBatch> {
    let source = segments.as_ref().map(|s| s.test.clone());
    let gen = generator_for(cfg, source)?;
    generate(&gen, &cfg.market, cfg.eval_paths, eval_seed(cfg))
}

fn run_evaluate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let segments = load_segments(cfg)?;
    let ckpt = cfg
        .checkpoint
        .clone()
        .unwrap_or_else(|| out_dir.join("policy.ckpt"));
    let mut policy = TrainedPolicy::load(&ckpt)?;
    policy.discount = cfg.discount;
    let paths = eval_paths(cfg, &segments)?;
    let stats = deepstop::evaluate(&policy, &paths, &cfg.market)?;
    #[derive(Serialize)]
    struct EvaluateOutput {
        checkpoint: String,
        generator: String,
        paths: usize,
        seed: u64,
        stats: EvalStats,
    }
    write_json(
        &out_dir.join("evaluate.json"),
        &EvaluateOutput {
            checkpoint: ckpt.display().to_string(),
            generator: cfg.generator_kind.as_str().to_string(),
            paths: paths.batch(),
            seed: eval_seed(cfg),
            stats,
        },
    )?;
    println!(
        "evaluated {} paths: mean payoff {:.6} (95% ci {:.6}..{:.6})",
        paths.batch(),
        stats.mean,
        stats.ci95.0,
        stats.ci95.1
    );
    Ok(())
}

fn run_compare(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    if !cfg.seed_explicit {
        return Err(Error::Config(
            "compare requires an explicit seed (evaluation.seed or --seed) so both methods \
             score identical paths"
                .into(),
        ));
    }
    let segments = load_segments(cfg)?;
    let policy = train_policy(cfg, &segments)?;
    policy.save(&out_dir.join("policy.ckpt"))?;
    bench::write_epoch_trace(&out_dir.join("epoch_trace.csv"), &policy.trace)?;

    let fit_source = segments.as_ref().map(|s| s.train.clone());
    let fit_gen = generator_for(cfg, fit_source)?;
    let fit = generate(&fit_gen, &cfg.market, cfg.lsmc_fit_paths, fit_seed(cfg))?;
    let model = lsmc::lsmc_fit(&fit, &cfg.market, cfg.lsmc_degree, cfg.discount)?;
    model.save(&out_dir.join("lsmc_model.txt"))?;

    let shared = eval_paths(cfg, &segments)?;
    let cnn_stats = deepstop::evaluate(&policy, &shared, &cfg.market)?;
    let lsmc_stats = lsmc::lsmc_apply(&model, &shared, &cfg.market)?;
    let row = ComparisonRow::new(
        cfg.sector.clone(),
        cfg.asset_label(),
        bench::path_return_moments(&shared),
        cnn_stats,
        lsmc_stats,
    )?;
    bench::emit_report(
        std::slice::from_ref(&row),
        &[],
        out_dir,
        &[ReportFormat::Csv, ReportFormat::Json],
    )?;
    println!(
        "compare {}: cnn {:.6} vs lsmc {:.6} ({}%)",
        row.asset,
        row.cnn.mean,
        row.lsmc.mean,
        bench::display_improvement(row.improvement_pct)
    );
    Ok(())
}

fn run_report(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let inputs = cfg
        .report_inputs
        .clone()
        .unwrap_or_else(|| vec![out_dir.join("comparison.csv")]);
    let mut rows = Vec::new();
    for input in &inputs {
        rows.extend(bench::parse_comparison_csv(input)?);
    }
    let series: Vec<NamedSeries> = Vec::new();
    bench::emit_report(
        &rows,
        &series,
        out_dir,
        &[ReportFormat::Csv, ReportFormat::Json],
    )?;
    println!(
        "report over {} rows from {} file(s)",
        rows.len(),
        inputs.len()
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("json serialization: {e}")))?;
    std::fs::write(path, json).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
