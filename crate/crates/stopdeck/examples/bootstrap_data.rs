//! Ingest a price CSV, split it chronologically, and bootstrap paths from
//! the training segment.
//!
//! Run with: cargo run --release --example bootstrap_data

use std::fmt::Write as _;

use stopdeck::datafeed::{load_prices, split, to_returns, SplitSpec};
use stopdeck::market::{MarketParams, OptionKind};
use stopdeck::simulate::gen_bootstrap;

fn main() {
    // write a synthetic daily-close file to a temp dir
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("prices.csv");
    let mut text = String::from("date,close\n");
    let base = chrono::NaiveDate::from_ymd_opt(2018, 1, 2).unwrap();
    for i in 0..900u64 {
        let t = i as f64;
        let close = 95.0 + 20.0 * (t * 0.021).sin() + 5.0 * (t * 0.11).cos();
        let date = base + chrono::Days::new(i + i / 5 * 2);
        let _ = writeln!(text, "{},{close:.4}", date.format("%Y-%m-%d"));
    }
    std::fs::write(&csv_path, text).unwrap();

    let prices = load_prices(&csv_path).expect("load");
    println!(
        "loaded {} closes from {} (rows {}..{})",
        prices.prices.len(),
        csv_path.display(),
        prices.provenance.first_row,
        prices.provenance.last_row
    );

    let series = to_returns(&prices, "synthetic").expect("returns");
    let spec = SplitSpec::new(0.8, 0.7).unwrap();
    let (train, val, test) = split(&series, &spec).expect("split");
    println!(
        "chronological split: train {} / validation {} / test {}",
        train.len(),
        val.len(),
        test.len()
    );
    let (mean, std) = train.moments();
    println!("train-segment returns: mean {mean:+.5}, std {std:.5}");

    let params = MarketParams::new(100.0, 100.0, 1.0, 0.05, 0.0, 0.0, 60, OptionKind::Put).unwrap();
    let paths = gen_bootstrap(&train, &params, 10_000, 9).expect("bootstrap");
    let terminal: Vec<f64> = (0..paths.batch()).map(|i| paths.price(i, 60)).collect();
    let t_mean = terminal.iter().sum::<f64>() / terminal.len() as f64;
    println!(
        "bootstrapped {} paths of {} steps from contiguous windows; terminal mean {t_mean:.3}",
        paths.batch(),
        paths.steps()
    );
}
