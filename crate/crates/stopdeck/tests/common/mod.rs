//! Shared test oracles, independent of the library's pricing paths.

use stopdeck::market::{MarketParams, OptionKind};

/// Cox-Ross-Rubinstein binomial price of a Bermudan option whose exercise
/// is restricted to the N dates of `params`, built directly from the tree
/// recursion. `tree_steps` is rounded up to a multiple of N so every
/// exercise date lands on a tree level.
pub fn crr_bermudan_price(params: &MarketParams, tree_steps: usize) -> f64 {
    let n = params.steps;
    let per = tree_steps.div_ceil(n);
    let m = per * n;
    let dt = params.maturity / m as f64;
    let u = (params.sigma * dt.sqrt()).exp();
    let d = 1.0 / u;
    let growth = ((params.rate - params.dividend) * dt).exp();
    let p_up = (growth - d) / (u - d);
    assert!(
        (0.0..=1.0).contains(&p_up),
        "degenerate tree probability {p_up}"
    );
    let disc = (-params.rate * dt).exp();
    let intrinsic = |s: f64| -> f64 {
        match params.option_kind {
            OptionKind::Put => (params.strike - s).max(0.0),
            OptionKind::Call => (s - params.strike).max(0.0),
        }
    };
    // values at maturity over m+1 nodes; node j has j up-moves
    let mut values: Vec<f64> = (0..=m)
        .map(|j| intrinsic(params.s0 * u.powi(j as i32) * d.powi((m - j) as i32)))
        .collect();
    for level in (0..m).rev() {
        let exercisable = level > 0 && level % per == 0;
        for j in 0..=level {
            let cont = disc * (p_up * values[j + 1] + (1.0 - p_up) * values[j]);
            values[j] = if exercisable {
                let s = params.s0 * u.powi(j as i32) * d.powi((level - j) as i32);
                cont.max(intrinsic(s))
            } else {
                cont
            };
        }
    }
    values[0]
}

/// Writes a synthetic daily-close CSV (sine wave plus deterministic
/// wobble) and returns its path; used by bootstrap-generator tests.
#[allow(dead_code)]
pub fn write_synthetic_csv(dir: &std::path::Path, rows: usize) -> std::path::PathBuf {
    use std::fmt::Write as _;
    let mut text = String::from("date,close\n");
    let mut day = 0i64;
    let base = chrono::NaiveDate::from_ymd_opt(2015, 1, 2).unwrap();
    for i in 0..rows {
        let t = i as f64;
        let close = 100.0 * (1.0 + 0.25 * (t * 0.037).sin() + 0.08 * (t * 0.111).cos())
            + 0.5 * (t * 1.7).sin();
        let date = base + chrono::Days::new(day as u64);
        let _ = writeln!(text, "{},{:.6}", date.format("%Y-%m-%d"), close.max(1.0));
        day += if i % 5 == 4 { 3 } else { 1 }; // skip weekends now and then
    }
    let path = dir.join("synthetic.csv");
    std::fs::write(&path, text).unwrap();
    path
}

/// Reference put market used across the heavy checks: S0 120, K 100,
/// T 3, r 0.05, dividend 0.1, sigma 0.1.
#[allow(dead_code)]
pub fn reference_put_market(steps: usize) -> MarketParams {
    MarketParams::new(120.0, 100.0, 3.0, 0.05, 0.1, 0.1, steps, OptionKind::Put).unwrap()
}

/// Independent plain-loop forward pass that reports the smallest |v| over
/// all ReLU pre-activations across the batch. Finite differences are only
/// meaningful where no pre-activation sits within the probe step of the
/// ReLU kink, so gradient checks gate on this margin.
#[allow(dead_code)]
pub fn relu_kink_margin(
    net: &stopdeck::tensornet::Network,
    input: &stopdeck::tensornet::Tensor,
) -> f64 {
    use stopdeck::tensornet::{Activation, LayerSpec};
    let (channels, width) = net.input_shape();
    let per_sample = channels * width;
    let batch = input.len() / per_sample;
    let mut margin = f64::INFINITY;
    for b in 0..batch {
        let mut cur: Vec<f64> = input.data()[b * per_sample..(b + 1) * per_sample].to_vec();
        let mut shape = (channels, width);
        for (l, layer) in net.layers().iter().enumerate() {
            let (weights, bias) = net.layer_params(l);
            match *layer {
                LayerSpec::Flatten => {
                    shape = (1, shape.0 * shape.1);
                }
                LayerSpec::Dense {
                    inputs,
                    outputs,
                    activation,
                } => {
                    let mut next = vec![0.0; outputs];
                    for (o, nv) in next.iter_mut().enumerate() {
                        let mut v = bias[o];
                        for i in 0..inputs {
                            v += weights[o * inputs + i] * cur[i];
                        }
                        if activation == Activation::Relu {
                            margin = margin.min(v.abs());
                        }
                        *nv = activation.apply(v);
                    }
                    cur = next;
                    shape = (1, outputs);
                }
                LayerSpec::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    activation,
                } => {
                    let w_in = shape.1;
                    let w_out = w_in - kernel + 1;
                    let mut next = vec![0.0; out_channels * w_out];
                    for co in 0..out_channels {
                        for p in 0..w_out {
                            let mut v = bias[co];
                            for ci in 0..in_channels {
                                for kk in 0..kernel {
                                    v += weights[(co * in_channels + ci) * kernel + kk]
                                        * cur[ci * w_in + p + kk];
                                }
                            }
                            if activation == Activation::Relu {
                                margin = margin.min(v.abs());
                            }
                            next[co * w_out + p] = activation.apply(v);
                        }
                    }
                    cur = next;
                    shape = (out_channels, w_out);
                }
            }
        }
    }
    margin
}
