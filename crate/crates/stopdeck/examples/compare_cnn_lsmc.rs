//! Train the policy network and fit the baseline on harmonic paths, score
//! both on the same held-out paths, and emit the report files.
//!
//! Run with: cargo run --release --example compare_cnn_lsmc

use stopdeck::bench::{emit_report, path_return_moments, ComparisonRow, ReportFormat};
use stopdeck::deepstop::{evaluate, train, TrainingConfig};
use stopdeck::lsmc::{lsmc_apply, lsmc_fit};
use stopdeck::market::{MarketParams, OptionKind};
use stopdeck::rng::derive_seed;
use stopdeck::simulate::{generate, GeneratorSpec, HarmonicParams};

fn main() {
    let params = MarketParams::new(120.0, 100.0, 3.0, 0.05, 0.0, 0.1, 20, OptionKind::Put).unwrap();
    let gen = GeneratorSpec::Harmonic(HarmonicParams::default());
    let seed = 7;

    let cfg = TrainingConfig {
        epochs: 80,
        batch: 2048,
        window: 12,
        ..TrainingConfig::default()
    };
    println!("training policy ({} epochs)...", cfg.epochs);
    let policy = train(&gen, &params, &cfg, seed).expect("training");

    println!("fitting baseline (degree 3, 50k paths)...");
    let fit = generate(&gen, &params, 50_000, derive_seed(seed, 100, 0)).unwrap();
    let model = lsmc_fit(&fit, &params, 3, true).expect("lsmc fit");

    // both methods score the same held-out paths
    let shared = generate(&gen, &params, 50_000, derive_seed(seed, 200, 0)).unwrap();
    let cnn = evaluate(&policy, &shared, &params).unwrap();
    let lsmc = lsmc_apply(&model, &shared, &params).unwrap();
    let row = ComparisonRow::new(
        "Simulated",
        "harmonic",
        path_return_moments(&shared),
        cnn,
        lsmc,
    )
    .expect("comparison row");

    println!(
        "\n  policy payoff   {:7.4} ± {:.4}",
        row.cnn.mean,
        row.cnn.se()
    );
    println!(
        "  baseline payoff {:7.4} ± {:.4}",
        row.lsmc.mean,
        row.lsmc.se()
    );
    println!(
        "  improvement     {:>7}%",
        stopdeck::bench::display_improvement(row.improvement_pct)
    );

    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(
        &[row],
        &[],
        dir.path(),
        &[ReportFormat::Csv, ReportFormat::Json],
    )
    .expect("report");
    println!("\nreport files:");
    for f in files {
        println!("  {}", f.display());
        print!("{}", std::fs::read_to_string(f).unwrap());
    }
}
