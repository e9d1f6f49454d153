//! Contract parameters, intrinsic payoffs, discounting, and the payoff
//! matrix every downstream module works from.
//!
//! All payoffs are computed in double precision; there is no currency
//! rounding anywhere in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Put or call payoff convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Put,
    Call,
}

impl OptionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptionKind::Put => "put",
            OptionKind::Call => "call",
        }
    }
}

impl std::str::FromStr for OptionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "put" => Ok(OptionKind::Put),
            "call" => Ok(OptionKind::Call),
            other => Err(Error::InvalidInput(format!(
                "option kind must be 'put' or 'call', got '{other}'"
            ))),
        }
    }
}

/// Contract and market constants shared by generators, policies, and the
/// baseline: initial price, strike, maturity in years, risk-free rate,
/// dividend yield, volatility, and the number of exercise dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
    pub dividend: f64,
    pub sigma: f64,
    pub steps: usize,
    pub option_kind: OptionKind,
}

impl MarketParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        s0: f64,
        strike: f64,
        maturity: f64,
        rate: f64,
        dividend: f64,
        sigma: f64,
        steps: usize,
        option_kind: OptionKind,
    ) -> Result<Self> {
        let p = MarketParams {
            s0,
            strike,
            maturity,
            rate,
            dividend,
            sigma,
            steps,
            option_kind,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be > 0, got {v}")))
            }
        }
        fn non_negative(name: &str, v: f64) -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be >= 0, got {v}")))
            }
        }
        positive("s0", self.s0)?;
        positive("strike", self.strike)?;
        positive("maturity", self.maturity)?;
        non_negative("rate", self.rate)?;
        non_negative("dividend", self.dividend)?;
        non_negative("sigma", self.sigma)?;
        if self.steps < 2 {
            return Err(Error::InvalidInput(format!(
                "steps must be >= 2, got {}",
                self.steps
            )));
        }
        Ok(())
    }

    /// Exercise-grid spacing in years; strictly positive by construction.
    pub fn dt(&self) -> f64 {
        self.maturity / self.steps as f64
    }

    /// Returns a copy with a different exercise-date count.
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        let mut p = self.clone();
        p.steps = steps;
        p.validate()?;
        Ok(p)
    }

    /// Intrinsic payoff at price `s`; assumes `s` was validated upstream.
    #[inline]
    pub(crate) fn intrinsic(&self, s: f64) -> f64 {
        match self.option_kind {
            OptionKind::Put => (self.strike - s).max(0.0),
            OptionKind::Call => (s - self.strike).max(0.0),
        }
    }
}

/// Intrinsic value of a put: max(k − s, 0).
pub fn put_payoff(s: f64, k: f64) -> Result<f64> {
    check_price_pair(s, k)?;
    Ok((k - s).max(0.0))
}

/// Intrinsic value of a call: max(s − k, 0).
pub fn call_payoff(s: f64, k: f64) -> Result<f64> {
    check_price_pair(s, k)?;
    Ok((s - k).max(0.0))
}

fn check_price_pair(s: f64, k: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidInput(format!("price must be > 0, got {s}")));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidInput(format!("strike must be > 0, got {k}")));
    }
    Ok(())
}

/// Present value of `x` received `t` years ahead at continuously compounded
/// rate `r`: x·e^{−r·t}.
pub fn discount(x: f64, r: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "discount horizon must be >= 0, got {t}"
        )));
    }
    Ok(x * (-r * t).exp())
}

/// Where a batch of paths came from, for provenance and reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub seed: u64,
    pub generator: String,
}

/// A batch of simulated or bootstrapped price paths on a shared time grid.
///
/// `prices` is row-major `batch × (steps + 1)`; column 0 is time 0 and
/// always equals the initial price the batch was built with.
#[derive(Debug, Clone)]
pub struct PathBatch {
    prices: Vec<f64>,
    batch: usize,
    steps: usize,
    dt: f64,
    seed_info: SeedInfo,
}

impl PathBatch {
    /// Builds a batch from raw prices, enforcing the column-0 and
    /// positivity invariants.
    pub fn new(
        prices: Vec<f64>,
        batch: usize,
        steps: usize,
        dt: f64,
        s0: f64,
        seed_info: SeedInfo,
    ) -> Result<Self> {
        if batch == 0 {
            return Err(Error::InvalidInput("batch must be >= 1".into()));
        }
        if prices.len() != batch * (steps + 1) {
            return Err(Error::ShapeMismatch(format!(
                "prices length {} != batch {} x (steps {} + 1)",
                prices.len(),
                batch,
                steps
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
        }
        for (i, row) in prices.chunks_exact(steps + 1).enumerate() {
            if row[0] != s0 {
                return Err(Error::InvalidInput(format!(
                    "path {i} starts at {} instead of s0 = {s0}",
                    row[0]
                )));
            }
            if let Some(bad) = row.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidInput(format!(
                    "path {i} contains non-positive price {bad}"
                )));
            }
        }
        Ok(PathBatch {
            prices,
            batch,
            steps,
            dt,
            seed_info,
        })
    }

    /// Internal constructor for generators that already guarantee the
    /// invariants by construction.
    pub(crate) fn from_generator(
        prices: Vec<f64>,
        batch: usize,
        steps: usize,
        dt: f64,
        seed_info: SeedInfo,
    ) -> Self {
        debug_assert_eq!(prices.len(), batch * (steps + 1));
        PathBatch {
            prices,
            batch,
            steps,
            dt,
            seed_info,
        }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Number of exercise dates N; rows have N+1 columns.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed_info(&self) -> &SeedInfo {
        &self.seed_info
    }

    #[inline]
    pub fn price(&self, path: usize, step: usize) -> f64 {
        self.prices[path * (self.steps + 1) + step]
    }

    #[inline]
    pub fn row(&self, path: usize) -> &[f64] {
        let w = self.steps + 1;
        &self.prices[path * w..(path + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.prices.chunks_exact(self.steps + 1)
    }
}

/// Dense row-major matrix of per-path, per-step values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Grid {
    pub(crate) fn from_raw(data: Vec<f64>, rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Grid { data, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Intrinsic payoff of every path at every step, optionally discounted to
/// time 0 with e^{−r·t·dt}.
///
/// Discounting defaults to ON at every call site in this crate: comparing
/// payoffs collected at different stopping times without discounting is
/// economically inconsistent. Passing `discounted = false` reproduces the
/// raw undiscounted payoffs.
pub fn payoff_matrix(paths: &PathBatch, params: &MarketParams, discounted: bool) -> Result<Grid> {
    if paths.steps() != params.steps {
        return Err(Error::ShapeMismatch(format!(
            "paths have {} steps but params expect {}",
            paths.steps(),
            params.steps
        )));
    }
    let rel_dt = (paths.dt() - params.dt()).abs() / params.dt();
    if rel_dt > 1e-9 {
        return Err(Error::ShapeMismatch(format!(
            "paths dt {} does not match params dt {}",
            paths.dt(),
            params.dt()
        )));
    }
    let n = params.steps;
    let cols = n + 1;
    let mut factors = vec![1.0; cols];
    if discounted {
        for (t, f) in factors.iter_mut().enumerate() {
            *f = (-params.rate * t as f64 * params.dt()).exp();
        }
    }
    let mut data = vec![0.0; paths.batch() * cols];
    for (out, row) in data.chunks_exact_mut(cols).zip(paths.rows()) {
        for t in 0..cols {
            out[t] = params.intrinsic(row[t]) * factors[t];
        }
    }
    Ok(Grid::from_raw(data, paths.batch(), cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn put_params(n: usize, rate: f64) -> MarketParams {
        MarketParams::new(90.0, 100.0, 1.0, rate, 0.0, 0.0, n, OptionKind::Put).unwrap()
    }

    fn constant_batch(level: f64, n: usize, dt: f64) -> PathBatch {
        PathBatch::new(
            vec![level; 3 * (n + 1)],
            3,
            n,
            dt,
            level,
            SeedInfo {
                seed: 0,
                generator: "test".into(),
            },
        )
        .unwrap()
    }

    #[test]
    fn put_payoff_examples() {
        assert_eq!(put_payoff(90.0, 100.0).unwrap(), 10.0);
        assert_eq!(put_payoff(120.0, 100.0).unwrap(), 0.0);
        assert_eq!(put_payoff(100.0, 100.0).unwrap(), 0.0);
        assert!(put_payoff(0.0, 100.0).is_err());
        assert!(put_payoff(100.0, -1.0).is_err());
    }

    #[test]
    fn call_payoff_examples() {
        assert_eq!(call_payoff(120.0, 100.0).unwrap(), 20.0);
        assert_eq!(call_payoff(90.0, 100.0).unwrap(), 0.0);
        assert_eq!(call_payoff(100.0, 100.0).unwrap(), 0.0);
        assert!(call_payoff(-5.0, 100.0).is_err());
    }

    #[test]
    fn discount_examples() {
        assert_eq!(discount(100.0, 0.0, 1.0).unwrap(), 100.0);
        assert_eq!(discount(100.0, 0.05, 0.0).unwrap(), 100.0);
        let v = discount(100.0, 0.05, 1.0).unwrap();
        assert!((v - 100.0 * (-0.05f64).exp()).abs() < 1e-12);
        assert!((v - 95.1229).abs() < 5e-5);
        assert!(discount(100.0, 0.05, -1.0).is_err());
    }

    #[test]
    fn payoff_matrix_constant_put_undiscounted() {
        let params = put_params(4, 0.0);
        let paths = constant_batch(90.0, 4, 0.25);
        let grid = payoff_matrix(&paths, &params, true).unwrap();
        assert!(grid.values().iter().all(|&v| v == 10.0));
    }

    #[test]
    fn payoff_matrix_single_step_discounted() {
        // K = 100, constant path at 90, r = 0.05, T = 1, N = 1 is below the
        // steps >= 2 floor, so use N = 2 with T = 2 to keep dt = 1 and check
        // column 1 against the closed form 10 e^{-0.05}.
        let params =
            MarketParams::new(90.0, 100.0, 2.0, 0.05, 0.0, 0.0, 2, OptionKind::Put).unwrap();
        let paths = constant_batch(90.0, 2, 1.0);
        let grid = payoff_matrix(&paths, &params, true).unwrap();
        assert!((grid.value(0, 1) - 10.0 * (-0.05f64).exp()).abs() < 1e-12);
        assert!((grid.value(0, 1) - 9.5123).abs() < 5e-5);
    }

    #[test]
    fn payoff_matrix_call_on_otm_path_is_zero() {
        let params =
            MarketParams::new(90.0, 100.0, 1.0, 0.0, 0.0, 0.0, 4, OptionKind::Call).unwrap();
        let paths = constant_batch(90.0, 4, 0.25);
        let grid = payoff_matrix(&paths, &params, true).unwrap();
        assert!(grid.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn payoff_matrix_rejects_step_mismatch() {
        let params = put_params(5, 0.0);
        let paths = constant_batch(90.0, 4, 0.25);
        assert!(payoff_matrix(&paths, &params, true).is_err());
    }

    #[test]
    fn path_batch_validates_invariants() {
        let info = SeedInfo {
            seed: 1,
            generator: "test".into(),
        };
        assert!(PathBatch::new(vec![100.0, 90.0], 1, 1, 0.5, 100.0, info.clone()).is_ok());
        // wrong starting column
        assert!(PathBatch::new(vec![99.0, 90.0], 1, 1, 0.5, 100.0, info.clone()).is_err());
        // non-positive entry
        assert!(PathBatch::new(vec![100.0, -3.0], 1, 1, 0.5, 100.0, info.clone()).is_err());
        // shape mismatch
        assert!(PathBatch::new(vec![100.0, 90.0, 80.0], 1, 1, 0.5, 100.0, info).is_err());
    }

    #[test]
    fn market_params_validation() {
        assert!(MarketParams::new(0.0, 100.0, 1.0, 0.0, 0.0, 0.1, 10, OptionKind::Put).is_err());
        assert!(
            MarketParams::new(100.0, 100.0, 1.0, -0.01, 0.0, 0.1, 10, OptionKind::Put).is_err()
        );
        assert!(MarketParams::new(100.0, 100.0, 1.0, 0.0, 0.0, 0.1, 1, OptionKind::Put).is_err());
        let p = MarketParams::new(100.0, 100.0, 2.0, 0.0, 0.0, 0.1, 8, OptionKind::Put).unwrap();
        assert!((p.dt() - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn put_call_parity_gap(s in 1e-3..1e4f64, k in 1e-3..1e4f64) {
            let p = put_payoff(s, k).unwrap();
            let c = call_payoff(s, k).unwrap();
            prop_assert!((p + c - (s - k).abs()).abs() < 1e-9 * (1.0 + (s - k).abs()));
        }

        #[test]
        fn discount_is_multiplicative(x in 0.1..1e4f64, r in 0.0..0.2f64,
                                      t1 in 0.0..10.0f64, t2 in 0.0..10.0f64) {
            let whole = discount(x, r, t1 + t2).unwrap();
            let split = discount(discount(x, r, t1).unwrap(), r, t2).unwrap();
            prop_assert!((whole - split).abs() <= 1e-12 * whole.abs().max(1e-300));
        }

        #[test]
        fn discount_monotone_in_horizon(x in 0.1..1e4f64, r in 1e-4..0.2f64,
                                        t in 0.0..10.0f64, dt in 1e-6..5.0f64) {
            prop_assert!(discount(x, r, t + dt).unwrap() < discount(x, r, t).unwrap());
        }
    }

    #[test]
    fn put_payoffs_bounded_by_strike() {
        // Eq-style bound: a put payoff can never exceed the strike.
        let params = put_params(4, 0.05);
        let paths = constant_batch(90.0, 4, 0.25);
        let grid = payoff_matrix(&paths, &params, false).unwrap();
        assert!(grid.values().iter().all(|&v| v <= params.strike));
    }
}
