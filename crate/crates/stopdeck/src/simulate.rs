//! Path generators: geometric Brownian motion, fractional Brownian motion,
//! harmonic composition with Gaussian noise, and bootstrap resampling of
//! observed returns.
//!
//! Every generator is deterministic per (seed, path index) and produces
//! bit-identical paths regardless of batch size or thread count; paths are
//! generated in parallel across the batch.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datafeed::ReturnSeries;
use crate::error::{Error, Result};
use crate::market::{MarketParams, PathBatch, SeedInfo};
use crate::rng;

/// Harmonic generator parameters: two sines over a shared amplitude plus
/// additive Gaussian noise, with optional per-path random phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicParams {
    /// Amplitude of both harmonics, as a fraction of s0.
    pub ampl: f64,
    /// First harmonic frequency in cycles per year.
    pub freq1: f64,
    /// Second harmonic frequency in cycles per year.
    pub freq2: f64,
    /// Additive-noise standard deviation as a fraction of s0 per step.
    pub noise_std: f64,
    /// Draw (φ1, φ2) uniformly on [0, 2π) per path instead of 0.
    pub random_phase: bool,
}

impl Default for HarmonicParams {
    fn default() -> Self {
        HarmonicParams {
            ampl: 0.2,
            freq1: 0.3,
            freq2: 2.0,
            noise_std: 0.01,
            random_phase: true,
        }
    }
}

impl HarmonicParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ampl >= 0.0 && self.ampl.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "ampl must be >= 0, got {}",
                self.ampl
            )));
        }
        for (name, f) in [("freq1", self.freq1), ("freq2", self.freq2)] {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be > 0, got {f}")));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }
}

/// Which process drives a batch of paths.
#[derive(Debug, Clone)]
pub enum GeneratorSpec {
    Gbm,
    Fbm { hurst: f64 },
    Harmonic(HarmonicParams),
    Bootstrap { source: ReturnSeries },
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GeneratorSpec::Gbm => Ok(()),
            GeneratorSpec::Fbm { hurst } => check_hurst(*hurst),
            GeneratorSpec::Harmonic(h) => h.validate(),
            GeneratorSpec::Bootstrap { .. } => Ok(()),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            GeneratorSpec::Gbm => "gbm",
            GeneratorSpec::Fbm { .. } => "fbm",
            GeneratorSpec::Harmonic(_) => "harmonic",
            GeneratorSpec::Bootstrap { .. } => "bootstrap",
        }
    }
}

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "hurst must lie strictly inside (0,1), got {h}"
        )))
    }
}

/// Dispatches to the generator named by `spec`.
pub fn generate(
    spec: &GeneratorSpec,
    params: &MarketParams,
    batch: usize,
    seed: u64,
) -> Result<PathBatch> {
    spec.validate()?;
    match spec {
        GeneratorSpec::Gbm => gen_gbm(params, batch, seed),
        GeneratorSpec::Fbm { hurst } => gen_fbm(params, *hurst, batch, seed),
        GeneratorSpec::Harmonic(h) => gen_harmonic(params, h, batch, seed),
        GeneratorSpec::Bootstrap { source } => gen_bootstrap(source, params, batch, seed),
    }
}

fn check_batch(batch: usize) -> Result<()> {
    if batch == 0 {
        return Err(Error::InvalidInput("batch must be >= 1".into()));
    }
    Ok(())
}

fn alloc_paths(params: &MarketParams, batch: usize) -> Vec<f64> {
    vec![0.0; batch * (params.steps + 1)]
}

/// Geometric Brownian motion under the exact log-Euler scheme:
/// S_{t+1} = S_t · exp((r − δ − σ²/2)·dt + σ·√dt·Z).
pub fn gen_gbm(params: &MarketParams, batch: usize, seed: u64) -> Result<PathBatch> {
    params.validate()?;
    check_batch(batch)?;
    let n = params.steps;
    let dt = params.dt();
    let drift = (params.rate - params.dividend - 0.5 * params.sigma * params.sigma) * dt;
    let vol = params.sigma * dt.sqrt();
    let mut prices = alloc_paths(params, batch);
    prices
        .par_chunks_mut(n + 1)
        .enumerate()
        .for_each(|(path, row)| {
            row[0] = params.s0;
            for t in 1..=n {
                let z = rng::normal(seed, path as u64, t as u64);
                row[t] = row[t - 1] * (drift + vol * z).exp();
            }
        });
    Ok(PathBatch::from_generator(
        prices,
        batch,
        n,
        dt,
        SeedInfo {
            seed,
            generator: "gbm".into(),
        },
    ))
}

/// Fractional Brownian motion covariance
/// Γ(t_i, t_j) = ½(t_i^{2h} + t_j^{2h} − |t_i − t_j|^{2h}).
pub fn fbm_covariance(ti: f64, tj: f64, h: f64) -> Result<f64> {
    check_hurst(h)?;
    if !(ti >= 0.0 && tj >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "times must be >= 0, got ({ti}, {tj})"
        )));
    }
    let e = 2.0 * h;
    Ok(0.5 * (ti.powf(e) + tj.powf(e) - (ti - tj).abs().powf(e)))
}

/// Cached lower-triangular factor of the fBm covariance on the grid
/// t_k = k·dt, k = 1..steps; `factor · factorᵀ` reproduces the covariance.
#[derive(Debug)]
pub struct FbmFactor {
    pub steps: usize,
    pub hurst: f64,
    pub dt: f64,
    /// Row-major steps × steps lower-triangular matrix.
    factor: Vec<f64>,
}

impl FbmFactor {
    /// Builds (or fetches from the process-wide cache) the Cholesky factor
    /// for the grid (steps, hurst, dt).
    pub fn get(steps: usize, hurst: f64, dt: f64) -> Result<Arc<FbmFactor>> {
        check_hurst(hurst)?;
        if steps == 0 || !(dt > 0.0) {
            return Err(Error::InvalidInput(format!(
                "fbm grid needs steps >= 1 and dt > 0, got steps {steps}, dt {dt}"
            )));
        }
        static CACHE: OnceLock<Mutex<HashMap<(usize, u64, u64), Arc<FbmFactor>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (steps, hurst.to_bits(), dt.to_bits());
        if let Some(found) = cache.lock().unwrap().get(&key) {
            return Ok(found.clone());
        }
        let built = Arc::new(FbmFactor::build(steps, hurst, dt)?);
        cache
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| built.clone());
        Ok(built)
    }

    fn build(steps: usize, hurst: f64, dt: f64) -> Result<FbmFactor> {
        let n = steps;
        let mut gamma = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let ti = (i + 1) as f64 * dt;
                let tj = (j + 1) as f64 * dt;
                gamma[(i, j)] = fbm_covariance(ti, tj, hurst)?;
            }
        }
        let chol = nalgebra::Cholesky::new(gamma).ok_or_else(|| {
            Error::Numerical(format!(
                "fbm covariance factorization failed for grid of {n} steps (hurst {hurst})"
            ))
        })?;
        let l = chol.l();
        let mut factor = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                factor[i * n + j] = l[(i, j)];
            }
        }
        Ok(FbmFactor {
            steps,
            hurst,
            dt,
            factor,
        })
    }

    /// Correlates iid standard normals: out = factor · z.
    pub fn sample_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.steps;
        debug_assert_eq!(z.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let row = &self.factor[i * n..i * n + i + 1];
            let mut acc = 0.0;
            for (l, zv) in row.iter().zip(z.iter()) {
                acc += l * zv;
            }
            out[i] = acc;
        }
    }

    /// Reconstructs factor · factorᵀ at (i, j); used to test the cache.
    pub fn reconstructed_covariance(&self, i: usize, j: usize) -> f64 {
        let n = self.steps;
        let lo = i.min(j);
        let mut acc = 0.0;
        for k in 0..=lo {
            acc += self.factor[i * n + k] * self.factor[j * n + k];
        }
        acc
    }
}

/// Fractional Brownian motion prices S_t = s0 · exp(σ · B_H(t)); B_H is
/// drawn on the exercise grid through the cached covariance factor.
pub fn gen_fbm(params: &MarketParams, hurst: f64, batch: usize, seed: u64) -> Result<PathBatch> {
    params.validate()?;
    check_batch(batch)?;
    let n = params.steps;
    let dt = params.dt();
    let factor = FbmFactor::get(n, hurst, dt)?;
    let mut prices = alloc_paths(params, batch);
    prices
        .par_chunks_mut(n + 1)
        .enumerate()
        .for_each(|(path, row)| {
            let mut z = vec![0.0; n];
            let mut b = vec![0.0; n];
            for (t, zv) in z.iter_mut().enumerate() {
                *zv = rng::normal(seed, path as u64, (t + 1) as u64);
            }
            factor.sample_into(&z, &mut b);
            row[0] = params.s0;
            for t in 1..=n {
                row[t] = params.s0 * (params.sigma * b[t - 1]).exp();
            }
        });
    Ok(PathBatch::from_generator(
        prices,
        batch,
        n,
        dt,
        SeedInfo {
            seed,
            generator: "fbm".into(),
        },
    ))
}

// Phase draws use counter indices just past the step range so they never
// collide with the per-step noise draws.
const PHASE1_INDEX_OFFSET: u64 = 1;
const PHASE2_INDEX_OFFSET: u64 = 2;

/// Two-sine harmonic composition with additive Gaussian noise:
/// S_t = s0·(1 + a·sin(2π f1 t dt + φ1) + a·sin(2π f2 t dt + φ2)) + ε_t,
/// clamped below at 1e-6·s0. Column 0 is pinned to s0.
pub fn gen_harmonic(
    params: &MarketParams,
    spec: &HarmonicParams,
    batch: usize,
    seed: u64,
) -> Result<PathBatch> {
    params.validate()?;
    spec.validate()?;
    check_batch(batch)?;
    let n = params.steps;
    let dt = params.dt();
    let floor = 1e-6 * params.s0;
    let noise_scale = spec.noise_std * params.s0;
    let mut prices = alloc_paths(params, batch);
    prices
        .par_chunks_mut(n + 1)
        .enumerate()
        .for_each(|(path, row)| {
            let (phi1, phi2) = if spec.random_phase {
                (
                    rng::angle(seed, path as u64, n as u64 + PHASE1_INDEX_OFFSET),
                    rng::angle(seed, path as u64, n as u64 + PHASE2_INDEX_OFFSET),
                )
            } else {
                (0.0, 0.0)
            };
            row[0] = params.s0;
            for t in 1..=n {
                let time = t as f64 * dt;
                let level = params.s0
                    * (1.0
                        + spec.ampl * (std::f64::consts::TAU * spec.freq1 * time + phi1).sin()
                        + spec.ampl * (std::f64::consts::TAU * spec.freq2 * time + phi2).sin());
                let eps = if noise_scale > 0.0 {
                    noise_scale * rng::normal(seed, path as u64, t as u64)
                } else {
                    0.0
                };
                row[t] = (level + eps).max(floor);
            }
        });
    Ok(PathBatch::from_generator(
        prices,
        batch,
        n,
        dt,
        SeedInfo {
            seed,
            generator: "harmonic".into(),
        },
    ))
}

/// Start index of the historical window used by path `path`; exposed so
/// provenance can be recomputed from (seed, path) alone.
pub fn bootstrap_start_index(seed: u64, path: usize, source_len: usize, steps: usize) -> usize {
    let windows = source_len - steps + 1;
    rng::uniform_index(rng::counter(seed, path as u64, 0), windows)
}

/// Bootstrap paths by compounding a contiguous window of observed returns:
/// S_t = S_{t−1} · ρ_{i+t−1} with the window start i drawn uniformly.
pub fn gen_bootstrap(
    source: &ReturnSeries,
    params: &MarketParams,
    batch: usize,
    seed: u64,
) -> Result<PathBatch> {
    params.validate()?;
    check_batch(batch)?;
    let n = params.steps;
    if source.len() < n {
        return Err(Error::InvalidInput(format!(
            "bootstrap source has {} returns but {n} are required per path",
            source.len()
        )));
    }
    let dt = params.dt();
    let returns = source.returns();
    let mut prices = alloc_paths(params, batch);
    prices
        .par_chunks_mut(n + 1)
        .enumerate()
        .for_each(|(path, row)| {
            let start = bootstrap_start_index(seed, path, returns.len(), n);
            row[0] = params.s0;
            for t in 1..=n {
                row[t] = row[t - 1] * returns[start + t - 1];
            }
        });
    Ok(PathBatch::from_generator(
        prices,
        batch,
        n,
        dt,
        SeedInfo {
            seed,
            generator: "bootstrap".into(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datafeed::Provenance;
    use crate::market::OptionKind;

    fn reference_params(steps: usize) -> MarketParams {
        MarketParams::new(120.0, 100.0, 3.0, 0.05, 0.1, 0.1, steps, OptionKind::Put).unwrap()
    }

    fn series(returns: Vec<f64>) -> ReturnSeries {
        ReturnSeries::new(returns, "test", Provenance::synthetic("test")).unwrap()
    }

    #[test]
    fn gbm_zero_vol_is_pure_drift() {
        let params =
            MarketParams::new(100.0, 100.0, 2.0, 0.03, 0.0, 0.0, 8, OptionKind::Put).unwrap();
        let paths = gen_gbm(&params, 3, 11).unwrap();
        for t in 0..=8 {
            let expected = 100.0 * (0.03 * t as f64 * params.dt()).exp();
            let rel = (paths.price(1, t) - expected).abs() / expected;
            assert!(rel < 1e-12, "t = {t}: rel = {rel}");
        }
    }

    #[test]
    fn gbm_terminal_mean_within_clt_band() {
        // Closed-form lognormal mean: s0 e^{(r-δ)T}.
        let params = reference_params(10);
        let batch = 326_000;
        let paths = gen_gbm(&params, batch, 2024).unwrap();
        let terminal: Vec<f64> = (0..batch).map(|i| paths.price(i, 10)).collect();
        let mean = terminal.iter().sum::<f64>() / batch as f64;
        let var = terminal
            .iter()
            .map(|s| (s - mean) * (s - mean))
            .sum::<f64>()
            / (batch as f64 - 1.0);
        let se = (var / batch as f64).sqrt();
        let expected = 120.0 * ((0.05f64 - 0.1) * 3.0).exp();
        assert!(
            (mean - expected).abs() < 2.576 * se,
            "mean {mean} vs expected {expected} (se {se})"
        );

        // Log-variance: Var[ln S_T/s0] = σ² T.
        let log_mean = terminal.iter().map(|s| (s / 120.0).ln()).sum::<f64>() / batch as f64;
        let log_var = terminal
            .iter()
            .map(|s| {
                let d = (s / 120.0).ln() - log_mean;
                d * d
            })
            .sum::<f64>()
            / (batch as f64 - 1.0);
        let expected_var = 0.1f64 * 0.1 * 3.0;
        assert!(
            (log_var - expected_var).abs() / expected_var < 0.02,
            "log var {log_var} vs {expected_var}"
        );
    }

    #[test]
    fn gbm_log_increment_moments() {
        let params = reference_params(5);
        let batch = 100_000;
        let paths = gen_gbm(&params, batch, 7).unwrap();
        let dt = params.dt();
        let mut incs = Vec::with_capacity(batch * 5);
        for i in 0..batch {
            let row = paths.row(i);
            for t in 1..=5 {
                incs.push((row[t] / row[t - 1]).ln());
            }
        }
        let n = incs.len() as f64;
        let mean = incs.iter().sum::<f64>() / n;
        let var = incs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let expected_mean = (0.05 - 0.1 - 0.5 * 0.01) * dt;
        let expected_var = 0.01 * dt;
        let se = (var / n).sqrt();
        assert!(
            (mean - expected_mean).abs() < 4.0 * se,
            "mean {mean} vs {expected_mean}"
        );
        assert!(
            (var - expected_var).abs() / expected_var < 0.02,
            "var {var} vs {expected_var}"
        );
    }

    #[test]
    fn fbm_covariance_examples() {
        assert!((fbm_covariance(0.7, 0.7, 0.5).unwrap() - 0.7).abs() < 1e-12);
        assert!((fbm_covariance(1.0, 2.0, 0.5).unwrap() - 1.0).abs() < 1e-12);
        let v = fbm_covariance(1.0, 2.0, 0.7).unwrap();
        let expected = 0.5 * (1.0 + 2f64.powf(1.4) - 1.0);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 1.3195).abs() < 1e-4);
        assert!(fbm_covariance(1.0, 2.0, 1.5).is_err());
        assert!(fbm_covariance(-1.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn fbm_factor_reproduces_covariance() {
        let factor = FbmFactor::get(50, 0.7, 0.06).unwrap();
        for i in (0..50).step_by(7) {
            for j in (0..50).step_by(11) {
                let want =
                    fbm_covariance((i + 1) as f64 * 0.06, (j + 1) as f64 * 0.06, 0.7).unwrap();
                let got = factor.reconstructed_covariance(i, j);
                assert!(
                    (want - got).abs() < 1e-8,
                    "({i},{j}): got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn fbm_factor_is_cached() {
        let a = FbmFactor::get(20, 0.7, 0.1).unwrap();
        let b = FbmFactor::get(20, 0.7, 0.1).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn fbm_half_hurst_log_terminal_is_centered() {
        let mut params = reference_params(20);
        params.sigma = 0.1;
        let batch = 100_000;
        let paths = gen_fbm(&params, 0.5, batch, 99).unwrap();
        let logs: Vec<f64> = (0..batch)
            .map(|i| (paths.price(i, 20) / 120.0).ln())
            .collect();
        let mean = logs.iter().sum::<f64>() / batch as f64;
        let var = logs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (batch as f64 - 1.0);
        let se = (var / batch as f64).sqrt();
        assert!(mean.abs() < 4.0 * se, "mean {mean}, se {se}");
        // Var[σ B_{1/2}(T)] = σ² T.
        let expected = 0.01 * 3.0;
        assert!((var - expected).abs() / expected < 0.05, "var {var}");
    }

    #[test]
    fn fbm_half_hurst_matches_driftless_gbm_moments() {
        // h = 0.5 prices are exp(σ B_t), i.e. a GBM whose log-price drift
        // is zero: r − δ − σ²/2 = 0. Compare both log-terminal moments.
        let fbm_params = reference_params(10);
        let batch = 100_000;
        let fbm = gen_fbm(&fbm_params, 0.5, batch, 4).unwrap();
        let mut gbm_params = reference_params(10);
        gbm_params.rate = 0.5 * 0.1 * 0.1;
        gbm_params.dividend = 0.0;
        let gbm = gen_gbm(&gbm_params, batch, 5).unwrap();
        let logs = |paths: &PathBatch| -> (f64, f64) {
            let v: Vec<f64> = (0..batch)
                .map(|i| (paths.price(i, 10) / 120.0).ln())
                .collect();
            let mean = v.iter().sum::<f64>() / batch as f64;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (batch as f64 - 1.0);
            (mean, var)
        };
        let (m_fbm, v_fbm) = logs(&fbm);
        let (m_gbm, v_gbm) = logs(&gbm);
        let se = (v_fbm / batch as f64).sqrt() + (v_gbm / batch as f64).sqrt();
        assert!(
            (m_fbm - m_gbm).abs() < 4.0 * se,
            "means {m_fbm} vs {m_gbm} (se {se})"
        );
        let var_band = 4.0 * v_fbm * (2.0 / (batch as f64 - 1.0)).sqrt();
        assert!(
            (v_fbm - v_gbm).abs() < 2.0 * var_band,
            "vars {v_fbm} vs {v_gbm}"
        );
    }

    #[test]
    fn fbm_paths_deterministic() {
        let params = reference_params(12);
        let a = gen_fbm(&params, 0.7, 1, 31).unwrap();
        let b = gen_fbm(&params, 0.7, 1, 31).unwrap();
        assert_eq!(a.row(0), b.row(0));
    }

    #[test]
    fn harmonic_closed_form_without_noise() {
        // dt = 0.25 puts t = 1 at 0.25 years: 2π·0.3·0.25 = 0.15π and
        // 2π·2·0.25 = π, so S = 120(1 + 0.2 sin 0.15π + 0.2 sin π).
        let params = reference_params(12);
        let spec = HarmonicParams {
            ampl: 0.2,
            freq1: 0.3,
            freq2: 2.0,
            noise_std: 0.0,
            random_phase: false,
        };
        let paths = gen_harmonic(&params, &spec, 2, 5).unwrap();
        let expected = 120.0 * (1.0 + 0.2 * (0.15 * std::f64::consts::PI).sin());
        assert!((paths.price(0, 1) - expected).abs() < 1e-9);
        assert!((paths.price(0, 1) - 130.896).abs() < 1e-3);
    }

    #[test]
    fn harmonic_zero_amplitude_is_constant() {
        let params = reference_params(10);
        let spec = HarmonicParams {
            ampl: 0.0,
            noise_std: 0.0,
            random_phase: false,
            ..HarmonicParams::default()
        };
        let paths = gen_harmonic(&params, &spec, 2, 5).unwrap();
        assert!(paths.row(0).iter().all(|&s| s == 120.0));
    }

    #[test]
    fn harmonic_without_noise_or_phase_repeats_across_paths() {
        let params = reference_params(10);
        let spec = HarmonicParams {
            noise_std: 0.0,
            random_phase: false,
            ..HarmonicParams::default()
        };
        let paths = gen_harmonic(&params, &spec, 4, 5).unwrap();
        for i in 1..4 {
            assert_eq!(paths.row(0), paths.row(i));
        }
    }

    #[test]
    fn harmonic_random_phase_varies_across_paths() {
        let params = reference_params(10);
        let spec = HarmonicParams {
            noise_std: 0.0,
            random_phase: true,
            ..HarmonicParams::default()
        };
        let paths = gen_harmonic(&params, &spec, 2, 5).unwrap();
        assert_ne!(paths.row(0), paths.row(1));
    }

    #[test]
    fn bootstrap_constant_returns_compound() {
        let src = series(vec![1.01; 3]);
        let params =
            MarketParams::new(100.0, 100.0, 1.0, 0.0, 0.0, 0.0, 3, OptionKind::Put).unwrap();
        let paths = gen_bootstrap(&src, &params, 2, 9).unwrap();
        let row = paths.row(0);
        for (got, want) in row.iter().zip([100.0, 101.0, 102.01, 103.0301]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn bootstrap_single_window_identical_paths() {
        let src = series(vec![1.02, 0.99, 1.01]);
        let params =
            MarketParams::new(50.0, 100.0, 1.0, 0.0, 0.0, 0.0, 3, OptionKind::Put).unwrap();
        let paths = gen_bootstrap(&src, &params, 5, 123).unwrap();
        for i in 1..5 {
            assert_eq!(paths.row(0), paths.row(i));
        }
    }

    #[test]
    fn bootstrap_window_product_matches_terminal() {
        let returns: Vec<f64> = (0..40)
            .map(|i| 1.0 + 0.01 * ((i as f64) * 0.9).sin())
            .collect();
        let src = series(returns.clone());
        let params =
            MarketParams::new(100.0, 100.0, 1.0, 0.0, 0.0, 0.0, 7, OptionKind::Put).unwrap();
        let seed = 77;
        let paths = gen_bootstrap(&src, &params, 64, seed).unwrap();
        for i in 0..64 {
            let start = bootstrap_start_index(seed, i, returns.len(), 7);
            let product: f64 = returns[start..start + 7].iter().product();
            let rel = (paths.price(i, 7) / 100.0 - product).abs() / product;
            assert!(rel < 1e-12, "path {i}: rel {rel}");
        }
    }

    #[test]
    fn bootstrap_ratios_come_from_source() {
        let returns: Vec<f64> = (0..25)
            .map(|i| 1.0 + 0.02 * ((i as f64) * 1.3).cos())
            .collect();
        let src = series(returns.clone());
        let params =
            MarketParams::new(80.0, 100.0, 1.0, 0.0, 0.0, 0.0, 5, OptionKind::Put).unwrap();
        let paths = gen_bootstrap(&src, &params, 32, 3).unwrap();
        for i in 0..32 {
            let row = paths.row(i);
            for t in 1..=5 {
                let ratio = row[t] / row[t - 1];
                assert!(
                    returns.iter().any(|r| (r - ratio).abs() < 1e-12),
                    "ratio {ratio} not observed in source"
                );
            }
        }
    }

    #[test]
    fn bootstrap_rejects_short_source() {
        let src = series(vec![1.01, 1.02]);
        let params =
            MarketParams::new(100.0, 100.0, 1.0, 0.0, 0.0, 0.0, 5, OptionKind::Put).unwrap();
        let msg = gen_bootstrap(&src, &params, 1, 0).unwrap_err().to_string();
        assert!(msg.contains('2') && msg.contains('5'), "{msg}");
    }

    #[test]
    fn generators_deterministic_per_path_across_batch_sizes() {
        let params = reference_params(15);
        let small = gen_gbm(&params, 8, 42).unwrap();
        let large = gen_gbm(&params, 64, 42).unwrap();
        for i in 0..8 {
            assert_eq!(small.row(i), large.row(i));
        }
        let spec = HarmonicParams::default();
        let hs = gen_harmonic(&params, &spec, 4, 42).unwrap();
        let hl = gen_harmonic(&params, &spec, 32, 42).unwrap();
        for i in 0..4 {
            assert_eq!(hs.row(i), hl.row(i));
        }
    }

    #[test]
    fn generators_independent_of_thread_count() {
        let params = reference_params(15);
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = pool1.install(|| gen_gbm(&params, 100, 5).unwrap());
        let b = pool4.install(|| gen_gbm(&params, 100, 5).unwrap());
        for i in 0..100 {
            assert_eq!(a.row(i), b.row(i));
        }
    }
}
