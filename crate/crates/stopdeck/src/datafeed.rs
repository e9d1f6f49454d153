//! Historical price ingestion, return computation, and chronological
//! splitting.
//!
//! CSV contract: UTF-8 with a header row, columns `date` (ISO-8601) and
//! `close` (decimal), rows in ascending date order; lines starting with
//! `#` are ignored. Extra columns are tolerated.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chronologically ordered close prices plus where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub prices: Vec<f64>,
    pub provenance: Provenance,
}

/// Source file and 1-based row range (header counted) behind a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub first_row: usize,
    pub last_row: usize,
}

impl Provenance {
    pub fn synthetic(label: &str) -> Self {
        Provenance {
            source: format!("synthetic:{label}"),
            first_row: 0,
            last_row: 0,
        }
    }
}

/// A sequence of relative returns ρ_t = S_t / S_{t−1}, all strictly
/// positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    returns: Vec<f64>,
    label: String,
    provenance: Provenance,
}

impl ReturnSeries {
    pub fn new(
        returns: Vec<f64>,
        label: impl Into<String>,
        provenance: Provenance,
    ) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::InvalidInput("return series is empty".into()));
        }
        if let Some((i, bad)) = returns
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidInput(format!(
                "return at index {i} must be > 0 and finite, got {bad}"
            )));
        }
        Ok(ReturnSeries {
            returns,
            label: label.into(),
            provenance,
        })
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Sample mean and standard deviation of ρ − 1.
    pub fn moments(&self) -> (f64, f64) {
        let n = self.returns.len() as f64;
        let mean = self.returns.iter().map(|r| r - 1.0).sum::<f64>() / n;
        let var = if self.returns.len() > 1 {
            self.returns
                .iter()
                .map(|r| {
                    let d = (r - 1.0) - mean;
                    d * d
                })
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        (mean, var.sqrt())
    }
}

/// How a series is cut into train / validation / test segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of the data used in-sample (train + validation).
    pub in_sample_frac: f64,
    /// Fraction of the in-sample portion used for training.
    pub train_frac: f64,
}

impl SplitSpec {
    pub fn new(in_sample_frac: f64, train_frac: f64) -> Result<Self> {
        let s = SplitSpec {
            in_sample_frac,
            train_frac,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("in_sample_frac", self.in_sample_frac),
            ("train_frac", self.train_frac),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be strictly inside (0,1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Loads chronologically ordered positive close prices from a CSV file.
pub fn load_prices(path: &Path) -> Result<PriceSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_err(path, 0, format!("cannot open csv: {e}")))?;

    let headers = reader
        .headers()
        .map_err(|e| data_err(path, 1, format!("cannot read header: {e}")))?
        .clone();
    let date_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("date"))
        .ok_or_else(|| data_err(path, 1, "missing 'date' column".into()))?;
    let close_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("close"))
        .ok_or_else(|| data_err(path, 1, "missing 'close' column".into()))?;

    let mut prices = Vec::new();
    let mut prev_date: Option<NaiveDate> = None;
    let mut first_row = 0usize;
    let mut last_row = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| data_err(path, 0, format!("malformed row: {e}")))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        let date_str = record
            .get(date_col)
            .ok_or_else(|| data_err(path, line, "missing date field".into()))?;
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d")
            .map_err(|_| data_err(path, line, format!("unparseable date '{date_str}'")))?;
        if let Some(prev) = prev_date {
            if date <= prev {
                return Err(data_err(
                    path,
                    line,
                    format!("dates out of order: {date} follows {prev}"),
                ));
            }
        }
        prev_date = Some(date);
        let close_str = record
            .get(close_col)
            .ok_or_else(|| data_err(path, line, "missing close field".into()))?;
        let close: f64 = close_str
            .parse()
            .map_err(|_| data_err(path, line, format!("unparseable close '{close_str}'")))?;
        if !(close > 0.0 && close.is_finite()) {
            return Err(data_err(
                path,
                line,
                format!("close must be > 0, got {close}"),
            ));
        }
        if prices.is_empty() {
            first_row = line;
        }
        last_row = line;
        prices.push(close);
    }
    if prices.is_empty() {
        return Err(data_err(path, 0, "no data rows".into()));
    }
    Ok(PriceSeries {
        prices,
        provenance: Provenance {
            source: path.display().to_string(),
            first_row,
            last_row,
        },
    })
}

fn data_err(path: &Path, line: usize, message: String) -> Error {
    Error::Data {
        path: PathBuf::from(path),
        line,
        message,
    }
}

/// Converts prices to relative returns ρ_t = S_t / S_{t−1}; the result has
/// one element fewer than the input.
pub fn to_returns(series: &PriceSeries, label: impl Into<String>) -> Result<ReturnSeries> {
    returns_from_prices(&series.prices, label, series.provenance.clone())
}

/// Return computation over a bare price slice.
pub fn returns_from_prices(
    prices: &[f64],
    label: impl Into<String>,
    provenance: Provenance,
) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 prices to form returns, got {}",
            prices.len()
        )));
    }
    let returns: Vec<f64> = prices.windows(2).map(|w| w[1] / w[0]).collect();
    ReturnSeries::new(returns, label, provenance)
}

/// Cuts a series into contiguous chronological (train, validation, test)
/// segments. Segment lengths are floor-rounded against the full length;
/// remainders go to the last segment of each cut.
pub fn split(
    series: &ReturnSeries,
    spec: &SplitSpec,
) -> Result<(ReturnSeries, ReturnSeries, ReturnSeries)> {
    spec.validate()?;
    let len = series.len();
    let in_len = floor_frac(len, spec.in_sample_frac);
    let train_len = floor_frac(len, spec.in_sample_frac * spec.train_frac);
    let val_len = in_len.saturating_sub(train_len);
    let test_len = len - in_len;
    for (name, l) in [
        ("training", train_len),
        ("validation", val_len),
        ("test", test_len),
    ] {
        if l == 0 {
            return Err(Error::InvalidInput(format!(
                "split leaves the {name} segment empty (len {len}, in_sample_frac {}, train_frac {})",
                spec.in_sample_frac, spec.train_frac
            )));
        }
    }
    let seg = |range: std::ops::Range<usize>, tag: &str| -> Result<ReturnSeries> {
        let mut prov = series.provenance().clone();
        prov.source = format!("{}#{tag}", prov.source);
        ReturnSeries::new(series.returns()[range].to_vec(), series.label(), prov)
    };
    Ok((
        seg(0..train_len, "train")?,
        seg(train_len..in_len, "val")?,
        seg(in_len..len, "test")?,
    ))
}

// Floor of len * frac with a one-ulp-scale guard so that exact products
// like 9573 * (7658/9573) do not land just below the integer.
fn floor_frac(len: usize, frac: f64) -> usize {
    ((len as f64) * frac + 1e-9).floor() as usize
}
