//! Acceptance suite: every release criterion as a runnable check, one
//! pass/fail line each. Run with
//! `cargo test --release --test acceptance -- --nocapture`.

mod common;

use std::process::Command;

use stopdeck::bench::{
    aggregate_sector, clairvoyant_stats, display_improvement, european_stats, improvement_pct,
    ComparisonRow, EvalStats,
};
use stopdeck::datafeed::{load_prices, to_returns};
use stopdeck::deepstop::{
    build_state, evaluate, stop_probability, train, PolicySpec, TrainingConfig,
};
use stopdeck::lsmc::{lsmc_apply, lsmc_fit};
use stopdeck::market::{payoff_matrix, MarketParams, OptionKind};
use stopdeck::rng::derive_seed;
use stopdeck::simulate::{fbm_covariance, generate, GeneratorSpec, HarmonicParams};
use stopdeck::tensornet::{grad_check, Tensor};

fn pass(criterion: &str, detail: String) {
    println!("[PASS] {criterion}: {detail}");
}

fn check(criterion: &str, ok: bool, detail: String) {
    if ok {
        pass(criterion, detail);
    } else {
        println!("[FAIL] {criterion}: {detail}");
        panic!("{criterion} failed: {detail}");
    }
}

fn combined_se(a: &EvalStats, b: &EvalStats) -> f64 {
    (a.se().powi(2) + b.se().powi(2)).sqrt()
}

fn row_with_improvement(sector: &str, asset: &str, imp: f64) -> ComparisonRow {
    ComparisonRow {
        sector: sector.into(),
        asset: asset.into(),
        mean_return: (0.0, 0.0),
        cnn: EvalStats::from_moments(1.0, 0.0, 1),
        lsmc: EvalStats::from_moments(1.0, 0.0, 1),
        improvement_pct: imp,
    }
}

/// Criterion 1 — the reported improvement metrics reproduce exactly after
/// integer display rounding.
#[test]
fn criterion_1_metric_reproduction() {
    let ipg = display_improvement(improvement_pct(6.67, 0.64).unwrap());
    assert_eq!(ipg, 1042);
    let dish = display_improvement(improvement_pct(6.07, 1.19).unwrap());
    assert_eq!(dish, 510);

    let communications: Vec<ComparisonRow> = [826.0, 424.0, 539.0, 1042.0, 510.0]
        .iter()
        .enumerate()
        .map(|(i, &imp)| row_with_improvement("Communications", &format!("c{i}"), imp))
        .collect();
    let comm = display_improvement(aggregate_sector(&communications).unwrap().improvement_pct);
    assert_eq!(comm, 668);

    let discretionary: Vec<ComparisonRow> = [433.0, 1310.0, 1078.0, 687.0, 1212.0]
        .iter()
        .enumerate()
        .map(|(i, &imp)| row_with_improvement("Consumer Discretionary", &format!("d{i}"), imp))
        .collect();
    let disc = display_improvement(aggregate_sector(&discretionary).unwrap().improvement_pct);
    assert_eq!(disc, 944);

    pass(
        "criterion 1 (metric reproduction)",
        format!("row metrics {ipg}/{dish}, sector means {comm}/{disc}"),
    );
}

/// Criterion 2 — in-sample LSMC on the reference GBM put within 1% of a binomial
/// tree restricted to the same exercise dates.
#[test]
fn criterion_2_lsmc_vs_tree_oracle() {
    let params = common::reference_put_market(50);
    let tree = common::crr_bermudan_price(&params, 2000);
    let paths = generate(&GeneratorSpec::Gbm, &params, 100_000, 20_02).unwrap();
    let model = lsmc_fit(&paths, &params, 3, true).unwrap();
    let rel = (model.in_sample.mean - tree).abs() / tree;
    check(
        "criterion 2 (lsmc vs tree)",
        rel < 0.01,
        format!(
            "lsmc in-sample {:.6} vs tree {:.6} ({:.3}% off, tolerance 1%)",
            model.in_sample.mean,
            tree,
            100.0 * rel
        ),
    );
}

/// Criterion 3 — the trained policy on the reference GBM put lands within 2% of the
/// tree price on 100k fresh paths and never above it by more than 2 SE.
#[test]
fn criterion_3_policy_vs_tree_oracle() {
    let params = common::reference_put_market(50);
    let tree = common::crr_bermudan_price(&params, 2000);
    let cfg = TrainingConfig {
        epochs: 300,
        batch: 8192,
        window: 25,
        ..TrainingConfig::default()
    };
    let policy = train(&GeneratorSpec::Gbm, &params, &cfg, 30_03).unwrap();
    let fresh = generate(&GeneratorSpec::Gbm, &params, 100_000, 31_03).unwrap();
    let stats = evaluate(&policy, &fresh, &params).unwrap();
    let rel = (stats.mean - tree).abs() / tree;
    let within_band = rel < 0.02;
    let not_above = stats.mean <= tree + 2.0 * stats.se();
    check(
        "criterion 3 (policy vs tree)",
        within_band && not_above,
        format!(
            "policy {:.6} (se {:.6}) vs tree {:.6}: {:.3}% off (tolerance 2%), overshoot {}",
            stats.mean,
            stats.se(),
            tree,
            100.0 * rel,
            if not_above {
                "within 2 se"
            } else {
                "EXCEEDS 2 se"
            }
        ),
    );
}

/// Criterion 4 — reverse-mode gradients of the full policy architecture
/// match central differences at step 1e-5 to better than 1e-4.
///
/// Central differences are only valid where the loss is smooth, so the
/// check point is the first seed whose ReLU pre-activations all clear the
/// kink by a margin far above the probe step (verified with an
/// independent plain-loop forward pass).
#[test]
fn criterion_4_gradient_correctness() {
    let spec = PolicySpec::default(); // window 25, 5 channels
    let batch = 4;
    let data: Vec<f64> = (0..batch * spec.channels * spec.window)
        .map(|i| 1.0 + 0.2 * ((i as f64) * 0.473).sin())
        .collect();
    let input = Tensor::new(vec![batch, spec.channels, spec.window], data).unwrap();
    let (mut net, seed, margin) = (0..200)
        .find_map(|seed| {
            let net = spec.build_network(seed).unwrap();
            let margin = common::relu_kink_margin(&net, &input);
            (margin > 5e-3).then_some((net, seed, margin))
        })
        .expect("no init seed with a safe kink margin in 200 tries");
    let coeffs: Vec<f64> = (0..batch).map(|i| 0.4 + 0.3 * i as f64).collect();
    let report = grad_check(&mut net, &input, &coeffs, 1e-5).unwrap();
    check(
        "criterion 4 (gradient correctness)",
        report.max_rel_err < 1e-4 && report.checked > 0,
        format!(
            "max relative error {:.3e} over {} parameters (tolerance 1e-4; init seed {seed}, kink margin {margin:.2e})",
            report.max_rel_err, report.checked
        ),
    );
}

/// Criterion 5 — fractional Brownian motion reproduces its covariance at
/// 10 random grid pairs within 5%, and h = 0.5 matches standard Brownian
/// motion moments.
#[test]
fn criterion_5_fbm_fidelity() {
    let params =
        MarketParams::new(120.0, 100.0, 3.0, 0.05, 0.0, 0.1, 100, OptionKind::Put).unwrap();
    let batch = 100_000;
    let paths = generate(&GeneratorSpec::Fbm { hurst: 0.7 }, &params, batch, 50_05).unwrap();
    let dt = params.dt();
    // recover B_H = ln(S/s0)/sigma and test E[B_i B_j] at random pairs
    let mut worst: (f64, usize, usize) = (0.0, 0, 0);
    for k in 0..10 {
        let i = 1 + (derive_seed(1905, 1, k) % 100) as usize;
        let j = 1 + (derive_seed(1905, 2, k) % 100) as usize;
        let mut acc = 0.0;
        for p in 0..batch {
            let bi = (paths.price(p, i) / 120.0).ln() / 0.1;
            let bj = (paths.price(p, j) / 120.0).ln() / 0.1;
            acc += bi * bj;
        }
        let empirical = acc / batch as f64;
        let analytic = fbm_covariance(i as f64 * dt, j as f64 * dt, 0.7).unwrap();
        let rel = (empirical - analytic).abs() / analytic;
        if rel > worst.0 {
            worst = (rel, i, j);
        }
        assert!(
            rel < 0.05,
            "pair ({i},{j}): empirical {empirical} vs {analytic} ({:.2}% off)",
            100.0 * rel
        );
    }

    // h = 0.5 reduces to standard Brownian motion: B_T centered, var = T
    let half = generate(&GeneratorSpec::Fbm { hurst: 0.5 }, &params, batch, 51_05).unwrap();
    let logs: Vec<f64> = (0..batch)
        .map(|p| (half.price(p, 100) / 120.0).ln() / 0.1)
        .collect();
    let mean = logs.iter().sum::<f64>() / batch as f64;
    let var = logs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (batch as f64 - 1.0);
    let se_mean = (var / batch as f64).sqrt();
    let var_band = 3.0_f64 * var * (2.0 / (batch as f64 - 1.0)).sqrt();
    assert!(
        mean.abs() < 4.0 * se_mean,
        "B_T mean {mean} vs se {se_mean}"
    );
    assert!(
        (var - 3.0).abs() < var_band.max(3.0 * 0.02),
        "B_T var {var} vs T = 3"
    );
    pass(
        "criterion 5 (fbm fidelity)",
        format!(
            "worst covariance pair ({}, {}) off by {:.2}% (tolerance 5%); h=0.5 terminal mean {:.4}, var {:.4} vs 3",
            worst.1, worst.2, 100.0 * worst.0, mean, var
        ),
    );
}

fn sandwich(
    label: &str,
    gen: &GeneratorSpec,
    params: &MarketParams,
    train_cfg: &TrainingConfig,
    seed: u64,
) {
    let policy = train(gen, params, train_cfg, seed).unwrap();
    let fit = generate(gen, params, 20_000, derive_seed(seed, 61, 0)).unwrap();
    let model = lsmc_fit(&fit, params, 3, true).unwrap();
    let eval = generate(gen, params, 20_000, derive_seed(seed, 62, 0)).unwrap();
    let cnn = evaluate(&policy, &eval, params).unwrap();
    let lsmc = lsmc_apply(&model, &eval, params).unwrap();
    let european = european_stats(&eval, params, true).unwrap();
    let clairvoyant = clairvoyant_stats(&eval, params, true).unwrap();
    for (name, stats) in [("policy", &cnn), ("lsmc", &lsmc)] {
        let lo = european.mean - 2.0 * combined_se(&european, stats);
        let hi = clairvoyant.mean + 2.0 * combined_se(&clairvoyant, stats);
        assert!(
            stats.mean >= lo && stats.mean <= hi,
            "{label}/{name}: {} outside [{lo}, {hi}] (european {}, clairvoyant {})",
            stats.mean,
            european.mean,
            clairvoyant.mean
        );
    }
    println!(
        "  {label}: european {:.4} <= policy {:.4} / lsmc {:.4} <= clairvoyant {:.4}",
        european.mean, cnn.mean, lsmc.mean, clairvoyant.mean
    );
}

/// Criterion 6 — on every generator, both methods sit between the
/// maturity-only payoff and the clairvoyant bound (2-SE slack).
#[test]
fn criterion_6_ordering_on_every_generator() {
    let cfg = TrainingConfig {
        epochs: 60,
        batch: 2048,
        window: 12,
        ..TrainingConfig::default()
    };
    let gbm = common::reference_put_market(20);
    sandwich("gbm", &GeneratorSpec::Gbm, &gbm, &cfg, 60_01);

    let fbm_params =
        MarketParams::new(120.0, 100.0, 3.0, 0.05, 0.0, 0.1, 20, OptionKind::Put).unwrap();
    sandwich(
        "fbm",
        &GeneratorSpec::Fbm { hurst: 0.7 },
        &fbm_params,
        &cfg,
        60_02,
    );

    let harmonic_params =
        MarketParams::new(120.0, 100.0, 3.0, 0.05, 0.0, 0.1, 20, OptionKind::Put).unwrap();
    sandwich(
        "harmonic",
        &GeneratorSpec::Harmonic(HarmonicParams::default()),
        &harmonic_params,
        &cfg,
        60_03,
    );

    let dir = tempfile::tempdir().unwrap();
    let csv = common::write_synthetic_csv(dir.path(), 1500);
    let prices = load_prices(&csv).unwrap();
    let source = to_returns(&prices, "synthetic").unwrap();
    let boot_params =
        MarketParams::new(100.0, 100.0, 1.0, 0.05, 0.0, 0.0, 20, OptionKind::Put).unwrap();
    sandwich(
        "bootstrap",
        &GeneratorSpec::Bootstrap { source },
        &boot_params,
        &cfg,
        60_04,
    );

    pass(
        "criterion 6 (ordering on every generator)",
        "gbm, fbm, harmonic, bootstrap all satisfy the european/clairvoyant sandwich".into(),
    );
}

/// Criterion 7 — on harmonic paths the trained policy beats the
/// maturity-only rule by at least 5 standard errors.
#[test]
fn criterion_7_harmonic_advantage() {
    let params = MarketParams::new(120.0, 100.0, 3.0, 0.05, 0.0, 0.1, 20, OptionKind::Put).unwrap();
    let gen = GeneratorSpec::Harmonic(HarmonicParams {
        noise_std: 0.01,
        random_phase: true,
        ..HarmonicParams::default()
    });
    let cfg = TrainingConfig {
        epochs: 150,
        batch: 4096,
        window: 12,
        ..TrainingConfig::default()
    };
    let policy = train(&gen, &params, &cfg, 70_07).unwrap();
    let eval = generate(&gen, &params, 50_000, 71_07).unwrap();
    let cnn = evaluate(&policy, &eval, &params).unwrap();
    let european = european_stats(&eval, &params, true).unwrap();
    // conservative unpaired standard error of the difference
    let se = combined_se(&cnn, &european);
    let margin = cnn.mean - european.mean;
    check(
        "criterion 7 (harmonic advantage)",
        margin >= 5.0 * se,
        format!(
            "policy {:.4} vs maturity-only {:.4}: margin {:.4} = {:.1} se (needed 5)",
            cnn.mean,
            european.mean,
            margin,
            margin / se
        ),
    );
}

/// Criterion 8 — compare runs are byte-identical across reruns and across
/// thread counts.
#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg_path,
        "market.s0 = 120\nmarket.strike = 100\nmarket.dividend = 0.1\nmarket.steps = 10\n\
         generator.kind = gbm\ntraining.epochs = 3\ntraining.batch = 512\ntraining.window = 8\n\
         lsmc.fit_paths = 4000\nevaluation.paths = 4000\nevaluation.seed = 808\n",
    )
    .unwrap();
    let run = |out: &std::path::Path, threads: Option<usize>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_stopdeck"));
        cmd.env_remove("STOPDECK_OUT")
            .arg("compare")
            .arg("--config")
            .arg(&cfg_path)
            .arg("--out")
            .arg(out);
        if let Some(t) = threads {
            cmd.args(["--threads", &t.to_string()]);
        }
        let output = cmd.output().unwrap();
        assert!(
            output.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        std::fs::read(out.join("comparison.csv")).unwrap()
    };
    let a = run(&dir.path().join("a"), None);
    let b = run(&dir.path().join("b"), None);
    assert_eq!(a, b, "identical config + seed must be byte-identical");
    let t1 = run(&dir.path().join("t1"), Some(1));
    let t2 = run(&dir.path().join("t2"), Some(2));
    let t4 = run(&dir.path().join("t4"), Some(4));
    assert_eq!(t1, t2, "thread count must not change outputs");
    assert_eq!(t1, t4, "thread count must not change outputs");
    assert_eq!(a, t1, "threaded runs match the default run");
    pass(
        "criterion 8 (determinism)",
        "comparison.csv byte-identical across reruns and --threads 1/2/4".into(),
    );
}

/// Criterion 9 — on deterministic monotone-decreasing put paths both
/// methods select the exhaustively verified optimal stopping step.
#[test]
fn criterion_9_brute_force_equivalence() {
    // sigma = 0, dividend > rate: deterministic decreasing price
    let params = MarketParams::new(100.0, 100.0, 1.0, 1.25, 2.5, 0.0, 5, OptionKind::Put).unwrap();
    let gen = GeneratorSpec::Gbm;
    let paths = generate(&gen, &params, 64, 90_09).unwrap();
    let grid = payoff_matrix(&paths, &params, true).unwrap();
    let (best_step, best_value) = (1..=5)
        .map(|t| (t, grid.value(0, t)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();

    let cfg = TrainingConfig {
        epochs: 400,
        batch: 16,
        window: 5,
        ..TrainingConfig::default()
    };
    let policy = train(&gen, &params, &cfg, 91_09).unwrap();
    let mut policy_step = None;
    for t in 1..5 {
        let state = build_state(&paths, t, &params, 5, true).unwrap();
        if stop_probability(&policy, &state).unwrap()[0] > 0.5 {
            policy_step = Some(t);
            break;
        }
    }
    assert_eq!(
        policy_step,
        Some(best_step),
        "policy stops at {policy_step:?}, brute force says {best_step}"
    );
    let cnn = evaluate(&policy, &paths, &params).unwrap();
    assert!((cnn.mean - best_value).abs() < 1e-12);

    let model = lsmc_fit(&paths, &params, 3, true).unwrap();
    let lsmc = lsmc_apply(&model, &paths, &params).unwrap();
    assert!(
        (lsmc.mean - best_value).abs() < 1e-12,
        "lsmc stops away from the optimum: {} vs {best_value}",
        lsmc.mean
    );
    pass(
        "criterion 9 (brute-force equivalence)",
        format!("both methods stop at step {best_step} collecting {best_value:.6}"),
    );
}
