//! Check simulated fractional Brownian motion against its covariance
//! Γ(s, t) = ½(s^{2h} + t^{2h} − |s − t|^{2h}).
//!
//! Run with: cargo run --release --example fbm_covariance

use stopdeck::market::{MarketParams, OptionKind};
use stopdeck::simulate::{fbm_covariance, gen_fbm};

fn main() {
    let hurst = 0.7;
    let steps = 40;
    let params =
        MarketParams::new(100.0, 100.0, 2.0, 0.0, 0.0, 1.0, steps, OptionKind::Put).unwrap();
    let batch = 50_000;
    let paths = gen_fbm(&params, hurst, batch, 11).expect("fbm generation");
    let dt = params.dt();

    // recover B_H(t) = ln(S_t / s0) / sigma and compare second moments
    println!("pair (t_i, t_j)        empirical   analytic   rel err");
    for &(i, j) in &[(5usize, 5usize), (10, 30), (20, 20), (8, 40), (40, 40)] {
        let ti = i as f64 * dt;
        let tj = j as f64 * dt;
        let mut acc = 0.0;
        for p in 0..batch {
            let bi = (paths.price(p, i) / 100.0).ln();
            let bj = (paths.price(p, j) / 100.0).ln();
            acc += bi * bj;
        }
        let empirical = acc / batch as f64;
        let analytic = fbm_covariance(ti, tj, hurst).unwrap();
        println!(
            "({ti:5.2}, {tj:5.2})    {empirical:10.5} {analytic:10.5}   {:7.4}%",
            100.0 * (empirical - analytic).abs() / analytic
        );
    }
    println!("\ncovariance factor is cached per (steps, hurst, dt) and reused across calls");
}
