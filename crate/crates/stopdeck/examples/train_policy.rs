//! Train a stopping policy on geometric Brownian motion and compare it
//! with the maturity-only rule.
//!
//! Run with: cargo run --release --example train_policy

use stopdeck::bench::{clairvoyant_stats, european_stats};
use stopdeck::deepstop::{evaluate, train, TrainingConfig};
use stopdeck::market::{MarketParams, OptionKind};
use stopdeck::simulate::{generate, GeneratorSpec};

fn main() {
    let params = MarketParams::new(120.0, 100.0, 3.0, 0.05, 0.1, 0.1, 20, OptionKind::Put).unwrap();
    let cfg = TrainingConfig {
        epochs: 60,
        batch: 2048,
        window: 12,
        ..TrainingConfig::default()
    };
    println!(
        "training: {} epochs, batch {}, window {}",
        cfg.epochs, cfg.batch, cfg.window
    );
    let t0 = std::time::Instant::now();
    let policy = train(&GeneratorSpec::Gbm, &params, &cfg, 42).expect("training");
    println!("trained in {:?}", t0.elapsed());
    for rec in policy.trace.iter().step_by(10) {
        println!(
            "  epoch {:>3}: training payoff {:7.4}  loss {:9.4}",
            rec.epoch, rec.mean_payoff, rec.loss
        );
    }

    let paths = generate(&GeneratorSpec::Gbm, &params, 50_000, 4242).unwrap();
    let stats = evaluate(&policy, &paths, &params).unwrap();
    let european = european_stats(&paths, &params, true).unwrap();
    let clairvoyant = clairvoyant_stats(&paths, &params, true).unwrap();
    println!("\non 50k fresh paths:");
    println!(
        "  maturity-only payoff  {:7.4} ± {:.4}",
        european.mean,
        european.se()
    );
    println!(
        "  trained policy payoff {:7.4} ± {:.4}",
        stats.mean,
        stats.se()
    );
    println!("  clairvoyant bound     {:7.4}", clairvoyant.mean);
}
