//! Verify the policy network's reverse pass against central finite
//! differences over every parameter.
//!
//! Run with: cargo run --release --example grad_check

use stopdeck::deepstop::PolicySpec;
use stopdeck::tensornet::{grad_check, Tensor};

fn main() {
    let spec = PolicySpec::default(); // window 25, 5 channels
    let mut net = spec.build_network(17).expect("network");
    println!(
        "policy network: window {}, {} parameters",
        spec.window,
        net.param_len()
    );

    let batch = 4;
    let data: Vec<f64> = (0..batch * spec.channels * spec.window)
        .map(|i| 1.0 + 0.1 * ((i as f64) * 0.61).sin())
        .collect();
    let input = Tensor::new(vec![batch, spec.channels, spec.window], data).unwrap();
    let coeffs: Vec<f64> = (0..batch).map(|i| 0.5 + 0.25 * i as f64).collect();

    let t0 = std::time::Instant::now();
    let report = grad_check(&mut net, &input, &coeffs, 1e-5).expect("grad check");
    println!(
        "checked {} parameters ({} skipped below the dead-gradient floor) in {:?}",
        report.checked,
        report.skipped,
        t0.elapsed()
    );
    println!(
        "max relative error vs central differences: {:.3e}",
        report.max_rel_err
    );
    assert!(report.max_rel_err < 1e-4);
    println!("PASS: reverse pass agrees with finite differences (< 1e-4)");
}
