//! Least-squares Monte Carlo baseline: backward-inductive polynomial
//! regression of continuation values on the current price, with separate
//! fit (in-sample) and apply (out-of-sample) modes.
//!
//! The regression state is deliberately the current price only, normalized
//! by the strike; regressions run on in-the-money paths with a monomial
//! basis {1, x, ..., x^d}.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::bench::EvalStats;
use crate::error::{Error, Result};
use crate::market::{MarketParams, PathBatch};

/// Exercise rule at one interior step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepRule {
    /// No in-the-money paths were available; never exercise here.
    AlwaysContinue,
    /// Exercise iff in the money and intrinsic ≥ polynomial(β, S/K).
    Fitted(Vec<f64>),
}

/// Provenance of the fitting run.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedOn {
    pub paths: usize,
    pub seed: u64,
    pub generator: String,
}

/// Per-step regression coefficients of the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct LsmcModel {
    pub degree: usize,
    pub discount: bool,
    steps: usize,
    /// rules[t-1] governs interior step t = 1..N-1.
    rules: Vec<StepRule>,
    /// Interior steps whose design matrix was rank-deficient and fell back
    /// to the pseudo-inverse solution.
    pub flagged_steps: Vec<usize>,
    pub fitted_on: FittedOn,
    /// Price statistics over the fitting paths under the fitted rule.
    pub in_sample: EvalStats,
}

impl LsmcModel {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rule(&self, t: usize) -> &StepRule {
        &self.rules[t - 1]
    }

    /// A model that never exercises early (the European reduction).
    pub fn always_continue(degree: usize, steps: usize, discount: bool) -> Result<LsmcModel> {
        if steps < 2 {
            return Err(Error::InvalidInput(format!(
                "steps must be >= 2, got {steps}"
            )));
        }
        Ok(LsmcModel {
            degree,
            discount,
            steps,
            rules: vec![StepRule::AlwaysContinue; steps - 1],
            flagged_steps: Vec::new(),
            fitted_on: FittedOn {
                paths: 0,
                seed: 0,
                generator: "none".into(),
            },
            in_sample: EvalStats::from_moments(0.0, 0.0, 0),
        })
    }
}

fn poly_eval(beta: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &b in beta.iter().rev() {
        acc = acc * x + b;
    }
    acc
}

/// Fits per-step continuation regressions by backward induction over the
/// given paths. Realized continuation cashflows are always discounted to
/// the regression step with the market rate; `discount` controls whether
/// the reported prices are time-0 discounted.
pub fn lsmc_fit(
    paths: &PathBatch,
    params: &MarketParams,
    degree: usize,
    discount: bool,
) -> Result<LsmcModel> {
    params.validate()?;
    if paths.steps() != params.steps {
        return Err(Error::ShapeMismatch(format!(
            "paths have {} steps but params expect {}",
            paths.steps(),
            params.steps
        )));
    }
    if degree == 0 {
        return Err(Error::InvalidInput("degree must be >= 1".into()));
    }
    let n = params.steps;
    let batch = paths.batch();
    let min_batch = 10 * (degree + 1);
    if batch < min_batch {
        return Err(Error::InvalidInput(format!(
            "lsmc_fit needs at least {min_batch} paths for degree {degree}, got {batch}"
        )));
    }
    let dt = params.dt();
    // cash[i] is the undiscounted payoff realized at exercise step tau[i].
    let mut cash: Vec<f64> = (0..batch)
        .map(|i| params.intrinsic(paths.price(i, n)))
        .collect();
    let mut tau: Vec<usize> = vec![n; batch];
    let mut rules = vec![StepRule::AlwaysContinue; n - 1];
    let mut flagged = Vec::new();
    let mut itm = Vec::with_capacity(batch);
    for t in (1..n).rev() {
        itm.clear();
        for i in 0..batch {
            if params.intrinsic(paths.price(i, t)) > 0.0 {
                itm.push(i);
            }
        }
        if itm.is_empty() {
            continue;
        }
        let m = itm.len();
        let cols = degree + 1;
        let mut design = DMatrix::<f64>::zeros(m, cols);
        let mut target = DVector::<f64>::zeros(m);
        for (row, &i) in itm.iter().enumerate() {
            let x = paths.price(i, t) / params.strike;
            let mut pow = 1.0;
            for c in 0..cols {
                design[(row, c)] = pow;
                pow *= x;
            }
            target[row] = cash[i] * (-params.rate * (tau[i] - t) as f64 * dt).exp();
        }
        let svd = design.svd(true, true);
        let s_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let eps = s_max * 1e-12;
        let rank = svd.rank(eps);
        if rank < cols {
            flagged.push(t);
        }
        let beta = svd
            .solve(&target, eps)
            .map_err(|e| Error::Numerical(format!("least squares failed at step {t}: {e}")))?;
        let beta: Vec<f64> = beta.iter().cloned().collect();
        for &i in &itm {
            let x = paths.price(i, t) / params.strike;
            let intrinsic = params.intrinsic(paths.price(i, t));
            if intrinsic >= poly_eval(&beta, x) {
                cash[i] = intrinsic;
                tau[i] = t;
            }
        }
        rules[t - 1] = StepRule::Fitted(beta);
    }
    flagged.reverse();
    let samples: Vec<f64> = if discount {
        cash.iter()
            .zip(&tau)
            .map(|(c, &t)| c * (-params.rate * t as f64 * dt).exp())
            .collect()
    } else {
        cash.clone()
    };
    Ok(LsmcModel {
        degree,
        discount,
        steps: n,
        rules,
        flagged_steps: flagged,
        fitted_on: FittedOn {
            paths: batch,
            seed: paths.seed_info().seed,
            generator: paths.seed_info().generator.clone(),
        },
        in_sample: EvalStats::from_samples(&samples),
    })
}

/// Applies a fitted model with the forward scan: exercise at the first
/// interior step that is in the money with intrinsic ≥ fitted continuation,
/// otherwise collect the terminal payoff.
pub fn lsmc_apply(
    model: &LsmcModel,
    paths: &PathBatch,
    params: &MarketParams,
) -> Result<EvalStats> {
    if paths.steps() != model.steps {
        return Err(Error::ShapeMismatch(format!(
            "paths have {} steps but the model was fitted for {}",
            paths.steps(),
            model.steps
        )));
    }
    if params.steps != model.steps {
        return Err(Error::ShapeMismatch(format!(
            "params expect {} steps but the model was fitted for {}",
            params.steps, model.steps
        )));
    }
    let n = model.steps;
    let dt = params.dt();
    let batch = paths.batch();
    let mut samples = Vec::with_capacity(batch);
    for i in 0..batch {
        let mut value = None;
        for t in 1..n {
            if let StepRule::Fitted(beta) = &model.rules[t - 1] {
                let price = paths.price(i, t);
                let intrinsic = params.intrinsic(price);
                if intrinsic > 0.0 && intrinsic >= poly_eval(beta, price / params.strike) {
                    value = Some((intrinsic, t));
                    break;
                }
            }
        }
        let (payoff, t) = value.unwrap_or((params.intrinsic(paths.price(i, n)), n));
        let discounted = if model.discount {
            payoff * (-params.rate * t as f64 * dt).exp()
        } else {
            payoff
        };
        samples.push(discounted);
    }
    Ok(EvalStats::from_samples(&samples))
}

impl LsmcModel {
    /// Plain-text serialization; floats use the shortest representation
    /// that parses back to the identical bits.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "lsmc-model v1");
        let _ = writeln!(out, "degree = {}", self.degree);
        let _ = writeln!(out, "steps = {}", self.steps);
        let _ = writeln!(out, "discount = {}", self.discount);
        let _ = writeln!(out, "fitted_paths = {}", self.fitted_on.paths);
        let _ = writeln!(out, "fitted_seed = {}", self.fitted_on.seed);
        let _ = writeln!(out, "fitted_generator = {}", self.fitted_on.generator);
        let _ = writeln!(
            out,
            "in_sample = {} {} {}",
            self.in_sample.mean, self.in_sample.std, self.in_sample.n
        );
        let flagged: Vec<String> = self.flagged_steps.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "flagged = {}", flagged.join(","));
        for (idx, rule) in self.rules.iter().enumerate() {
            match rule {
                StepRule::AlwaysContinue => {
                    let _ = writeln!(out, "step {} continue", idx + 1);
                }
                StepRule::Fitted(beta) => {
                    let coeffs: Vec<String> = beta.iter().map(|b| b.to_string()).collect();
                    let _ = writeln!(out, "step {} {}", idx + 1, coeffs.join(" "));
                }
            }
        }
        fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<LsmcModel> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != "lsmc-model v1" {
            return Err(Error::Checkpoint(format!(
                "unrecognized model header '{header}'"
            )));
        }
        let mut degree = None;
        let mut steps = None;
        let mut discount = None;
        let mut fitted = FittedOn {
            paths: 0,
            seed: 0,
            generator: String::new(),
        };
        let mut in_sample = EvalStats::from_moments(0.0, 0.0, 0);
        let mut flagged = Vec::new();
        let mut rules: Vec<(usize, StepRule)> = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("step ") {
                let mut parts = rest.split_whitespace();
                let t: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Checkpoint(format!("bad step line '{line}'")))?;
                let tokens: Vec<&str> = parts.collect();
                let rule =
                    if tokens == ["continue"] {
                        StepRule::AlwaysContinue
                    } else {
                        let beta: std::result::Result<Vec<f64>, _> =
                            tokens.iter().map(|v| v.parse::<f64>()).collect();
                        StepRule::Fitted(beta.map_err(|_| {
                            Error::Checkpoint(format!("bad coefficients in '{line}'"))
                        })?)
                    };
                rules.push((t, rule));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Checkpoint(format!("bad line '{line}'")))?;
            match key {
                "degree" => degree = value.parse().ok(),
                "steps" => steps = value.parse().ok(),
                "discount" => discount = value.parse().ok(),
                "fitted_paths" => fitted.paths = value.parse().unwrap_or(0),
                "fitted_seed" => fitted.seed = value.parse().unwrap_or(0),
                "fitted_generator" => fitted.generator = value.to_string(),
                "in_sample" => {
                    let vals: Vec<&str> = value.split_whitespace().collect();
                    if vals.len() == 3 {
                        let mean = vals[0].parse().unwrap_or(f64::NAN);
                        let std = vals[1].parse().unwrap_or(f64::NAN);
                        let n = vals[2].parse().unwrap_or(0);
                        in_sample = EvalStats::from_moments(mean, std, n);
                    }
                }
                "flagged" => {
                    flagged = value
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .filter_map(|s| s.parse().ok())
                        .collect();
                }
                other => {
                    return Err(Error::Checkpoint(format!("unknown model key '{other}'")));
                }
            }
        }
        let degree = degree.ok_or_else(|| Error::Checkpoint("missing degree".into()))?;
        let steps: usize = steps.ok_or_else(|| Error::Checkpoint("missing steps".into()))?;
        let discount = discount.ok_or_else(|| Error::Checkpoint("missing discount".into()))?;
        let mut ordered = vec![StepRule::AlwaysContinue; steps.saturating_sub(1)];
        for (t, rule) in rules {
            if t == 0 || t > ordered.len() {
                return Err(Error::Checkpoint(format!("step {t} out of range")));
            }
            ordered[t - 1] = rule;
        }
        Ok(LsmcModel {
            degree,
            discount,
            steps,
            rules: ordered,
            flagged_steps: flagged,
            fitted_on: fitted,
            in_sample,
        })
    }
}
