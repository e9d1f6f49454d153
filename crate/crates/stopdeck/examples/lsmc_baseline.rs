//! Fit the least-squares Monte Carlo baseline and price in and out of
//! sample.
//!
//! Run with: cargo run --release --example lsmc_baseline

use stopdeck::bench::{clairvoyant_stats, european_stats};
use stopdeck::lsmc::{lsmc_apply, lsmc_fit};
use stopdeck::market::{MarketParams, OptionKind};
use stopdeck::simulate::{generate, GeneratorSpec};

fn main() {
    let params = MarketParams::new(120.0, 100.0, 3.0, 0.05, 0.1, 0.1, 50, OptionKind::Put).unwrap();
    let fit_paths = generate(&GeneratorSpec::Gbm, &params, 100_000, 1).unwrap();
    let t0 = std::time::Instant::now();
    let model = lsmc_fit(&fit_paths, &params, 3, true).expect("fit");
    println!(
        "fitted degree-{} model on {} paths in {:?} ({} rank-deficient steps)",
        model.degree,
        model.fitted_on.paths,
        t0.elapsed(),
        model.flagged_steps.len()
    );
    println!(
        "in-sample price      {:7.4} ± {:.4}",
        model.in_sample.mean,
        model.in_sample.se()
    );

    let fresh = generate(&GeneratorSpec::Gbm, &params, 100_000, 2).unwrap();
    let out = lsmc_apply(&model, &fresh, &params).unwrap();
    println!("out-of-sample price  {:7.4} ± {:.4}", out.mean, out.se());

    let european = european_stats(&fresh, &params, true).unwrap();
    let clairvoyant = clairvoyant_stats(&fresh, &params, true).unwrap();
    println!("maturity-only bound  {:7.4}", european.mean);
    println!("clairvoyant bound    {:7.4}", clairvoyant.mean);
}
