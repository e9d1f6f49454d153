//! Sweep the exercise-date count and watch the attainable payoff grow;
//! emits the plot-data series for the sweep.
//!
//! Run with: cargo run --release --example payoff_vs_steps

use stopdeck::bench::{emit_report, payoff_vs_steps, NamedSeries, ReportFormat, SweepMethod};
use stopdeck::market::{MarketParams, OptionKind};
use stopdeck::simulate::GeneratorSpec;

fn main() {
    let params = MarketParams::new(120.0, 100.0, 3.0, 0.05, 0.1, 0.1, 50, OptionKind::Put).unwrap();
    let grid = [2usize, 5, 10, 25, 50];
    let method = SweepMethod::Lsmc {
        degree: 3,
        fit_paths: 40_000,
        discount: true,
    };
    println!("refitting the baseline per grid point on geometric Brownian motion...");
    let series =
        payoff_vs_steps(&method, &GeneratorSpec::Gbm, &params, &grid, 40_000, 3).expect("sweep");
    println!("\n  N    mean payoff   95% interval");
    for (n, stats) in &series {
        println!(
            "  {n:>3}  {:10.4}   [{:.4}, {:.4}]",
            stats.mean, stats.ci95.0, stats.ci95.1
        );
    }

    let dir = tempfile::tempdir().unwrap();
    let named = NamedSeries::from_steps("lsmc_payoff_vs_steps", &series);
    let files = emit_report(&[], &[named], dir.path(), &[ReportFormat::PlotData]).unwrap();
    println!("\nplot data written to {}:", files[0].display());
    print!("{}", std::fs::read_to_string(&files[0]).unwrap());
}
