//! Evaluation statistics, comparison metrics, sector aggregation, and
//! report emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::deepstop::{self, TrainingConfig};
use crate::error::{Error, Result};
use crate::lsmc;
use crate::market::{payoff_matrix, MarketParams, PathBatch};
use crate::rng;
use crate::simulate::{generate, GeneratorSpec};

/// Payoff statistics over a path set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
    pub n: u64,
    /// mean ± 1.96·std/√n.
    pub ci95: (f64, f64),
}

impl EvalStats {
    /// Builds statistics from raw samples. Panics on an empty slice; every
    /// call site guarantees at least one path.
    pub fn from_samples(samples: &[f64]) -> EvalStats {
        assert!(
            !samples.is_empty(),
            "EvalStats requires at least one sample"
        );
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        EvalStats::from_moments(mean, var.sqrt(), samples.len() as u64)
    }

    /// Builds statistics from already-computed moments.
    pub fn from_moments(mean: f64, std: f64, n: u64) -> EvalStats {
        let half = if n > 0 {
            1.96 * std / (n as f64).sqrt()
        } else {
            0.0
        };
        EvalStats {
            mean,
            std,
            n,
            ci95: (mean - half, mean + half),
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n > 0 {
            self.std / (self.n as f64).sqrt()
        } else {
            0.0
        }
    }
}

/// One asset (or sector) line of the policy-vs-baseline comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub sector: String,
    pub asset: String,
    /// Mean and standard deviation of the one-step relative returns − 1.
    pub mean_return: (f64, f64),
    pub cnn: EvalStats,
    pub lsmc: EvalStats,
    pub improvement_pct: f64,
}

impl ComparisonRow {
    pub fn new(
        sector: impl Into<String>,
        asset: impl Into<String>,
        mean_return: (f64, f64),
        cnn: EvalStats,
        lsmc: EvalStats,
    ) -> Result<ComparisonRow> {
        let improvement_pct = improvement_pct(cnn.mean, lsmc.mean)?;
        Ok(ComparisonRow {
            sector: sector.into(),
            asset: asset.into(),
            mean_return,
            cnn,
            lsmc,
            improvement_pct,
        })
    }
}

/// The "% improvement" metric: 100 · cnn_mean / lsmc_mean. The ratio form
/// (not the relative-difference form) is what the reported sector means
/// reproduce. Full precision is kept here; displays round to integers.
pub fn improvement_pct(cnn_mean: f64, lsmc_mean: f64) -> Result<f64> {
    if !(lsmc_mean > 0.0) {
        return Err(Error::InvalidInput(format!(
            "improvement undefined: baseline mean must be > 0, got {lsmc_mean}"
        )));
    }
    Ok(100.0 * cnn_mean / lsmc_mean)
}

/// Integer display rounding used in reports.
pub fn display_improvement(pct: f64) -> i64 {
    pct.round() as i64
}

/// Arithmetic mean of each numeric column across rows, including the
/// per-asset improvement values (not the ratio of mean payoffs). The
/// confidence interval is recomputed from the aggregated moments so the
/// stats invariant keeps holding.
pub fn aggregate_sector(rows: &[ComparisonRow]) -> Result<ComparisonRow> {
    if rows.is_empty() {
        return Err(Error::InvalidInput(
            "aggregate_sector needs a non-empty row list".into(),
        ));
    }
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&ComparisonRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let cnn = EvalStats::from_moments(
        mean(&|r| r.cnn.mean),
        mean(&|r| r.cnn.std),
        (mean(&|r| r.cnn.n as f64)).round() as u64,
    );
    let lsmc = EvalStats::from_moments(
        mean(&|r| r.lsmc.mean),
        mean(&|r| r.lsmc.std),
        (mean(&|r| r.lsmc.n as f64)).round() as u64,
    );
    Ok(ComparisonRow {
        sector: rows[0].sector.clone(),
        asset: format!("{} assets", rows.len()),
        mean_return: (mean(&|r| r.mean_return.0), mean(&|r| r.mean_return.1)),
        cnn,
        lsmc,
        improvement_pct: mean(&|r| r.improvement_pct),
    })
}

/// Payoff of the maturity-only (European) stopping rule.
pub fn european_stats(
    paths: &PathBatch,
    params: &MarketParams,
    discount: bool,
) -> Result<EvalStats> {
    let grid = payoff_matrix(paths, params, discount)?;
    let n = paths.steps();
    let samples: Vec<f64> = (0..paths.batch()).map(|i| grid.value(i, n)).collect();
    Ok(EvalStats::from_samples(&samples))
}

/// Anticipative upper bound: mean over paths of the best payoff in
/// hindsight over t = 1..N.
pub fn clairvoyant_stats(
    paths: &PathBatch,
    params: &MarketParams,
    discount: bool,
) -> Result<EvalStats> {
    let grid = payoff_matrix(paths, params, discount)?;
    let n = paths.steps();
    let samples: Vec<f64> = (0..paths.batch())
        .map(|i| (1..=n).map(|t| grid.value(i, t)).fold(f64::MIN, f64::max))
        .collect();
    Ok(EvalStats::from_samples(&samples))
}

/// Mean and standard deviation of one-step relative returns − 1 across a
/// path batch.
pub fn path_return_moments(paths: &PathBatch) -> (f64, f64) {
    let mut count = 0usize;
    let mut sum = 0.0;
    for row in paths.rows() {
        for w in row.windows(2) {
            sum += w[1] / w[0] - 1.0;
            count += 1;
        }
    }
    let mean = sum / count as f64;
    let mut var = 0.0;
    for row in paths.rows() {
        for w in row.windows(2) {
            let d = (w[1] / w[0] - 1.0) - mean;
            var += d * d;
        }
    }
    let var = if count > 1 {
        var / (count as f64 - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Which method a payoff-vs-steps sweep runs.
pub enum SweepMethod<'a> {
    /// Retrain the policy at every grid point.
    Policy(&'a TrainingConfig),
    /// Refit the baseline at every grid point.
    Lsmc {
        degree: usize,
        fit_paths: usize,
        discount: bool,
    },
}

/// Evaluation seed used for the grid point with `steps` exercise dates;
/// exposed so a single-point sweep can be reproduced by a direct call.
pub fn sweep_eval_seed(seed: u64, steps: usize) -> u64 {
    rng::derive_seed(seed, rng::STREAM_SWEEP_EVAL, steps as u64)
}

/// Training (or fitting) seed for the grid point with `steps` dates.
pub fn sweep_train_seed(seed: u64, steps: usize) -> u64 {
    rng::derive_seed(seed, rng::STREAM_SWEEP_TRAIN, steps as u64)
}

pub fn sweep_fit_seed(seed: u64, steps: usize) -> u64 {
    rng::derive_seed(seed, rng::STREAM_SWEEP_FIT, steps as u64)
}

/// Retrains/refits per exercise-date count and evaluates on fresh paths,
/// producing the series behind the payoff-versus-steps plots.
pub fn payoff_vs_steps(
    method: &SweepMethod,
    gen: &GeneratorSpec,
    params: &MarketParams,
    step_grid: &[usize],
    eval_paths: usize,
    seed: u64,
) -> Result<Vec<(usize, EvalStats)>> {
    if step_grid.iter().any(|&n| n < 2) {
        return Err(Error::InvalidInput(
            "every grid point must have at least 2 exercise dates".into(),
        ));
    }
    let mut series = Vec::with_capacity(step_grid.len());
    for &n in step_grid {
        let params_n = params.with_steps(n)?;
        let eval = generate(gen, &params_n, eval_paths, sweep_eval_seed(seed, n))?;
        let stats = match method {
            SweepMethod::Policy(cfg) => {
                let policy = deepstop::train(gen, &params_n, cfg, sweep_train_seed(seed, n))?;
                deepstop::evaluate(&policy, &eval, &params_n)?
            }
            SweepMethod::Lsmc {
                degree,
                fit_paths,
                discount,
            } => {
                let fit = generate(gen, &params_n, *fit_paths, sweep_fit_seed(seed, n))?;
                let model = lsmc::lsmc_fit(&fit, &params_n, *degree, *discount)?;
                lsmc::lsmc_apply(&model, &eval, &params_n)?
            }
        };
        series.push((n, stats));
    }
    Ok(series)
}

/// A named (x, stats) series destined for a plot-data file.
#[derive(Debug, Clone)]
pub struct NamedSeries {
    pub name: String,
    pub points: Vec<(f64, EvalStats)>,
}

impl NamedSeries {
    pub fn from_steps(name: impl Into<String>, series: &[(usize, EvalStats)]) -> NamedSeries {
        NamedSeries {
            name: name.into(),
            points: series.iter().map(|&(n, s)| (n as f64, s)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    PlotData,
}

pub const COMPARISON_HEADER: &str =
    "sector,asset,mean_return,return_std,cnn_mean,cnn_std,lsmc_mean,lsmc_std,improvement_pct";
pub const SECTORS_HEADER: &str =
    "sector,mean_return,return_std,cnn_mean,cnn_std,lsmc_mean,lsmc_std,improvement_pct";

fn comparison_line(row: &ComparisonRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        row.sector,
        row.asset,
        row.mean_return.0,
        row.mean_return.1,
        row.cnn.mean,
        row.cnn.std,
        row.lsmc.mean,
        row.lsmc.std,
        display_improvement(row.improvement_pct)
    )
}

/// Writes the comparison table, per-sector table, machine-readable summary,
/// and any plot-data series into `out_dir`; returns the files written.
pub fn emit_report(
    rows: &[ComparisonRow],
    series: &[NamedSeries],
    out_dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let mut written = Vec::new();
    let write = |path: PathBuf, content: String, written: &mut Vec<PathBuf>| -> Result<()> {
        fs::write(&path, content)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        written.push(path);
        Ok(())
    };
    if formats.contains(&ReportFormat::Csv) {
        let mut comparison = String::from(COMPARISON_HEADER);
        comparison.push('\n');
        for row in rows {
            comparison.push_str(&comparison_line(row));
            comparison.push('\n');
        }
        write(out_dir.join("comparison.csv"), comparison, &mut written)?;

        let mut sectors = String::from(SECTORS_HEADER);
        sectors.push('\n');
        for group in group_by_sector(rows) {
            let agg = aggregate_sector(&group)?;
            let _ = writeln!(
                sectors,
                "{},{},{},{},{},{},{},{}",
                agg.sector,
                agg.mean_return.0,
                agg.mean_return.1,
                agg.cnn.mean,
                agg.cnn.std,
                agg.lsmc.mean,
                agg.lsmc.std,
                display_improvement(agg.improvement_pct)
            );
        }
        write(out_dir.join("sectors.csv"), sectors, &mut written)?;
    }
    if formats.contains(&ReportFormat::Json) {
        #[derive(Serialize)]
        struct SectorSummary {
            sector: String,
            assets: usize,
            cnn_mean: f64,
            lsmc_mean: f64,
            improvement_pct: f64,
        }
        #[derive(Serialize)]
        struct Summary {
            rows: usize,
            mean_improvement_pct: Option<f64>,
            sectors: Vec<SectorSummary>,
        }
        let sectors: Vec<SectorSummary> = group_by_sector(rows)
            .into_iter()
            .map(|group| {
                let assets = group.len();
                let agg = aggregate_sector(&group)?;
                Ok(SectorSummary {
                    sector: agg.sector,
                    assets,
                    cnn_mean: agg.cnn.mean,
                    lsmc_mean: agg.lsmc.mean,
                    improvement_pct: agg.improvement_pct,
                })
            })
            .collect::<Result<_>>()?;
        let summary = Summary {
            rows: rows.len(),
            mean_improvement_pct: if rows.is_empty() {
                None
            } else {
                Some(rows.iter().map(|r| r.improvement_pct).sum::<f64>() / rows.len() as f64)
            },
            sectors,
        };
        let json = serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::Numerical(format!("summary serialization failed: {e}")))?;
        write(out_dir.join("summary.json"), json, &mut written)?;
    }
    if formats.contains(&ReportFormat::PlotData) {
        for s in series {
            let mut dat = String::from("# x mean lo hi\n");
            for (x, stats) in &s.points {
                let _ = writeln!(
                    dat,
                    "{} {} {} {}",
                    x, stats.mean, stats.ci95.0, stats.ci95.1
                );
            }
            write(out_dir.join(format!("{}.dat", s.name)), dat, &mut written)?;
        }
    }
    Ok(written)
}

/// Groups rows by sector, preserving first-appearance order.
fn group_by_sector(rows: &[ComparisonRow]) -> Vec<Vec<ComparisonRow>> {
    let mut order: Vec<String> = Vec::new();
    for row in rows {
        if !order.contains(&row.sector) {
            order.push(row.sector.clone());
        }
    }
    order
        .into_iter()
        .map(|sector| {
            rows.iter()
                .filter(|r| r.sector == sector)
                .cloned()
                .collect()
        })
        .collect()
}

/// Parses rows back from a comparison.csv. Path counts are not part of the
/// schema, so the restored stats carry n = 0 and degenerate intervals.
pub fn parse_comparison_csv(path: &Path) -> Result<Vec<ComparisonRow>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != COMPARISON_HEADER {
        return Err(Error::Data {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unexpected header '{header}'"),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Data {
                path: path.to_path_buf(),
                line: idx + 2,
                message: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse().map_err(|_| Error::Data {
                path: path.to_path_buf(),
                line: idx + 2,
                message: format!("bad number '{}'", fields[i]),
            })
        };
        rows.push(ComparisonRow {
            sector: fields[0].to_string(),
            asset: fields[1].to_string(),
            mean_return: (num(2)?, num(3)?),
            cnn: EvalStats::from_moments(num(4)?, num(5)?, 0),
            lsmc: EvalStats::from_moments(num(6)?, num(7)?, 0),
            improvement_pct: num(8)?,
        });
    }
    Ok(rows)
}

/// Writes the per-epoch training trace as `epoch,mean_payoff,loss`.
pub fn write_epoch_trace(path: &Path, trace: &[deepstop::EpochRecord]) -> Result<()> {
    let mut out = String::from("epoch,mean_payoff,loss\n");
    for rec in trace {
        let _ = writeln!(out, "{},{},{}", rec.epoch, rec.mean_payoff, rec.loss);
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
