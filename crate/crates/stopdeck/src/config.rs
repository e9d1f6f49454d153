//! Experiment configuration.
//!
//! The config format is UTF-8 text, one `key = value` per line with dotted
//! section prefixes (`market.strike = 100`) and `#` comments. Every key has
//! a documented default except `market.s0`, `market.strike`, and
//! `generator.kind`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::datafeed::SplitSpec;
use crate::deepstop::{OptimizerConfig, TrainingConfig};
use crate::error::{Error, Result};
use crate::market::{MarketParams, OptionKind};
use crate::rng;
use crate::simulate::{GeneratorSpec, HarmonicParams};

/// Which process the experiment draws paths from; the bootstrap source
/// series is attached at run time from `data.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Gbm,
    Fbm,
    Harmonic,
    Bootstrap,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Gbm => "gbm",
            GeneratorKind::Fbm => "fbm",
            GeneratorKind::Harmonic => "harmonic",
            GeneratorKind::Bootstrap => "bootstrap",
        }
    }
}

/// Data-file settings used by the bootstrap generator.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub csv: PathBuf,
    pub split: SplitSpec,
}

/// A fully validated experiment configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub market: MarketParams,
    pub discount: bool,
    pub generator_kind: GeneratorKind,
    pub hurst: f64,
    pub harmonic: HarmonicParams,
    pub training: TrainingConfig,
    pub lsmc_degree: usize,
    pub lsmc_fit_paths: usize,
    pub eval_paths: usize,
    pub seed: u64,
    /// Whether the seed came from the file or a flag rather than the
    /// default; `compare` requires an explicit seed.
    pub seed_explicit: bool,
    pub data: Option<DataConfig>,
    pub out_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub report_inputs: Option<Vec<PathBuf>>,
    pub sector: String,
    pub asset: Option<String>,
}

impl ExperimentConfig {
    /// Builds the generator spec; `source` must be provided for bootstrap.
    pub fn build_generator(
        &self,
        source: Option<crate::datafeed::ReturnSeries>,
    ) -> Result<GeneratorSpec> {
        let spec = match self.generator_kind {
            GeneratorKind::Gbm => GeneratorSpec::Gbm,
            GeneratorKind::Fbm => GeneratorSpec::Fbm { hurst: self.hurst },
            GeneratorKind::Harmonic => GeneratorSpec::Harmonic(self.harmonic),
            GeneratorKind::Bootstrap => GeneratorSpec::Bootstrap {
                source: source
                    .ok_or_else(|| Error::Config("bootstrap generator needs data.csv".into()))?,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn asset_label(&self) -> String {
        self.asset
            .clone()
            .unwrap_or_else(|| self.generator_kind.as_str().to_string())
    }

    /// Canonical dump of the resolved configuration: sorted keys, defaults
    /// filled, reparseable. `out_dir` is the directory resolved for this
    /// run.
    pub fn resolved_text(&self, out_dir: &Path) -> String {
        let mut map = BTreeMap::new();
        let m = &self.market;
        map.insert("market.s0", m.s0.to_string());
        map.insert("market.strike", m.strike.to_string());
        map.insert("market.maturity", m.maturity.to_string());
        map.insert("market.rate", m.rate.to_string());
        map.insert("market.dividend", m.dividend.to_string());
        map.insert("market.sigma", m.sigma.to_string());
        map.insert("market.steps", m.steps.to_string());
        map.insert("market.option_kind", m.option_kind.as_str().to_string());
        map.insert("market.discount", self.discount.to_string());
        map.insert("generator.kind", self.generator_kind.as_str().to_string());
        map.insert("generator.hurst", self.hurst.to_string());
        map.insert("generator.ampl", self.harmonic.ampl.to_string());
        map.insert("generator.freq1", self.harmonic.freq1.to_string());
        map.insert("generator.freq2", self.harmonic.freq2.to_string());
        map.insert("generator.noise_std", self.harmonic.noise_std.to_string());
        map.insert(
            "generator.random_phase",
            self.harmonic.random_phase.to_string(),
        );
        map.insert("training.epochs", self.training.epochs.to_string());
        map.insert("training.batch", self.training.batch.to_string());
        map.insert("training.window", self.training.window.to_string());
        match self.training.optimizer {
            OptimizerConfig::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
            } => {
                map.insert("training.optimizer", "adam".to_string());
                map.insert("training.learning_rate", learning_rate.to_string());
                map.insert("training.beta1", beta1.to_string());
                map.insert("training.beta2", beta2.to_string());
                map.insert("training.epsilon", epsilon.to_string());
                map.insert("training.momentum", DEFAULT_MOMENTUM.to_string());
            }
            OptimizerConfig::Momentum {
                learning_rate,
                momentum,
            } => {
                map.insert("training.optimizer", "momentum".to_string());
                map.insert("training.learning_rate", learning_rate.to_string());
                map.insert("training.momentum", momentum.to_string());
                map.insert("training.beta1", DEFAULT_BETA1.to_string());
                map.insert("training.beta2", DEFAULT_BETA2.to_string());
                map.insert("training.epsilon", DEFAULT_EPSILON.to_string());
            }
        }
        map.insert("lsmc.degree", self.lsmc_degree.to_string());
        map.insert("lsmc.fit_paths", self.lsmc_fit_paths.to_string());
        map.insert("evaluation.paths", self.eval_paths.to_string());
        map.insert("evaluation.seed", self.seed.to_string());
        if let Some(ckpt) = &self.checkpoint {
            map.insert("evaluation.checkpoint", ckpt.display().to_string());
        }
        if let Some(data) = &self.data {
            map.insert("data.csv", data.csv.display().to_string());
            map.insert("data.in_sample_frac", data.split.in_sample_frac.to_string());
            map.insert("data.train_frac", data.split.train_frac.to_string());
        }
        map.insert("output.dir", out_dir.display().to_string());
        if let Some(inputs) = &self.report_inputs {
            let joined: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
            map.insert("report.inputs", joined.join(","));
        }
        map.insert("report.sector", self.sector.clone());
        map.insert("report.asset", self.asset_label());
        let mut text = String::new();
        for (k, v) in map {
            let _ = writeln!(text, "{k} = {v}");
        }
        text
    }

    /// Stable fingerprint of the resolved configuration.
    pub fn fingerprint(&self, out_dir: &Path) -> u64 {
        rng::fnv1a(self.resolved_text(out_dir).as_bytes())
    }
}

const DEFAULT_BETA1: f64 = 0.9;
const DEFAULT_BETA2: f64 = 0.999;
const DEFAULT_EPSILON: f64 = 1e-8;
const DEFAULT_MOMENTUM: f64 = 0.9;
const DEFAULT_SEED: u64 = 42;

/// Every key the parser accepts. Suggestions for unknown keys come from
/// this table.
const KNOWN_KEYS: &[&str] = &[
    "market.s0",
    "market.strike",
    "market.maturity",
    "market.rate",
    "market.dividend",
    "market.sigma",
    "market.steps",
    "market.option_kind",
    "market.discount",
    "generator.kind",
    "generator.hurst",
    "generator.ampl",
    "generator.freq1",
    "generator.freq2",
    "generator.noise_std",
    "generator.random_phase",
    "training.epochs",
    "training.batch",
    "training.window",
    "training.optimizer",
    "training.learning_rate",
    "training.beta1",
    "training.beta2",
    "training.epsilon",
    "training.momentum",
    "lsmc.degree",
    "lsmc.fit_paths",
    "evaluation.paths",
    "evaluation.seed",
    "evaluation.checkpoint",
    "data.csv",
    "data.in_sample_frac",
    "data.train_frac",
    "output.dir",
    "report.inputs",
    "report.sector",
    "report.asset",
];

/// Parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config_with_overrides(path, &[])
}

/// Parses a config file, then applies `key=value` overrides with last-wins
/// semantics.
pub fn parse_config_with_overrides(
    path: &Path,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut pairs = parse_pairs(&text)?;
    for (k, v) in overrides {
        check_key(k)?;
        pairs.insert(k.clone(), v.clone());
    }
    build(pairs)
}

/// Parses config text directly (used by tests and the resolved-config log).
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    build(parse_pairs(text)?)
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected 'key = value', got '{raw}'",
                idx + 1
            ))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        check_key(&key)?;
        if value.is_empty() {
            return Err(Error::Config(format!(
                "line {}: key '{key}' has no value",
                idx + 1
            )));
        }
        pairs.insert(key, value);
    }
    Ok(pairs)
}

fn check_key(key: &str) -> Result<()> {
    if KNOWN_KEYS.contains(&key) {
        return Ok(());
    }
    let suggestion = closest_key(key);
    match suggestion {
        Some(s) => Err(Error::Config(format!(
            "unknown key '{key}' (did you mean '{s}'?)"
        ))),
        None => Err(Error::Config(format!("unknown key '{key}'"))),
    }
}

fn closest_key(key: &str) -> Option<&'static str> {
    let lower = key.to_ascii_lowercase();
    let mut best: Option<(usize, &'static str)> = None;
    for known in KNOWN_KEYS {
        let whole = levenshtein(&lower, known);
        let segment = known
            .rsplit('.')
            .next()
            .map(|seg| levenshtein(&lower, seg))
            .unwrap_or(usize::MAX);
        let d = whole.min(segment);
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, known));
        }
    }
    best.filter(|(d, _)| *d <= 3).map(|(_, k)| k)
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

struct Keyed {
    pairs: BTreeMap<String, String>,
}

impl Keyed {
    fn raw(&self, key: &str) -> Option<&str> {
        self.pairs.get(key).map(|s| s.as_str())
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::Config(format!("missing mandatory key '{key}'")))
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': bad number '{v}'"))),
        }
    }

    fn required_f64(&self, key: &str) -> Result<f64> {
        let v = self.required(key)?;
        v.parse()
            .map_err(|_| Error::Config(format!("key '{key}': bad number '{v}'")))
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': bad integer '{v}'"))),
        }
    }

    fn u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': bad integer '{v}'"))),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(Error::Config(format!(
                "key '{key}': expected true or false, got '{v}'"
            ))),
        }
    }
}

fn build(pairs: BTreeMap<String, String>) -> Result<ExperimentConfig> {
    let k = Keyed { pairs };

    let option_kind = match k.raw("market.option_kind").unwrap_or("put") {
        "put" => OptionKind::Put,
        "call" => OptionKind::Call,
        v => {
            return Err(Error::Config(format!(
                "key 'market.option_kind': expected put or call, got '{v}'"
            )))
        }
    };
    let market = MarketParams::new(
        k.required_f64("market.s0")?,
        k.required_f64("market.strike")?,
        k.f64("market.maturity", 3.0)?,
        k.f64("market.rate", 0.05)?,
        k.f64("market.dividend", 0.0)?,
        k.f64("market.sigma", 0.1)?,
        k.usize("market.steps", 50)?,
        option_kind,
    )
    .map_err(|e| Error::Config(format!("market parameters: {e}")))?;

    let generator_kind = match k.required("generator.kind")? {
        "gbm" => GeneratorKind::Gbm,
        "fbm" => GeneratorKind::Fbm,
        "harmonic" => GeneratorKind::Harmonic,
        "bootstrap" => GeneratorKind::Bootstrap,
        v => {
            return Err(Error::Config(format!(
                "key 'generator.kind': expected gbm|fbm|harmonic|bootstrap, got '{v}'"
            )))
        }
    };
    let hurst = k.f64("generator.hurst", 0.7)?;
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Config(format!(
            "key 'generator.hurst': must lie strictly inside (0,1), got {hurst}"
        )));
    }
    let harmonic = HarmonicParams {
        ampl: k.f64("generator.ampl", 0.2)?,
        freq1: k.f64("generator.freq1", 0.3)?,
        freq2: k.f64("generator.freq2", 2.0)?,
        noise_std: k.f64("generator.noise_std", 0.01)?,
        random_phase: k.bool("generator.random_phase", true)?,
    };
    harmonic
        .validate()
        .map_err(|e| Error::Config(format!("harmonic parameters: {e}")))?;

    let discount = k.bool("market.discount", true)?;
    let learning_rate = k.f64("training.learning_rate", 1e-3)?;
    let optimizer = match k.raw("training.optimizer").unwrap_or("adam") {
        "adam" => OptimizerConfig::Adam {
            learning_rate,
            beta1: k.f64("training.beta1", DEFAULT_BETA1)?,
            beta2: k.f64("training.beta2", DEFAULT_BETA2)?,
            epsilon: k.f64("training.epsilon", DEFAULT_EPSILON)?,
        },
        "momentum" => OptimizerConfig::Momentum {
            learning_rate,
            momentum: k.f64("training.momentum", DEFAULT_MOMENTUM)?,
        },
        v => {
            return Err(Error::Config(format!(
                "key 'training.optimizer': expected adam or momentum, got '{v}'"
            )))
        }
    };
    let training = TrainingConfig {
        epochs: k.usize("training.epochs", 300)?,
        batch: k.usize("training.batch", 8192)?,
        window: k.usize("training.window", 25)?,
        optimizer,
        discount,
    };
    if training.batch == 0 {
        return Err(Error::Config("key 'training.batch': must be >= 1".into()));
    }

    let data = match k.raw("data.csv") {
        None => None,
        Some(csv) => {
            let csv = PathBuf::from(csv);
            if !csv.exists() {
                return Err(Error::Config(format!(
                    "key 'data.csv': file {} does not exist",
                    csv.display()
                )));
            }
            let split = SplitSpec::new(
                k.f64("data.in_sample_frac", 0.8)?,
                k.f64("data.train_frac", 0.7)?,
            )
            .map_err(|e| Error::Config(format!("split fractions: {e}")))?;
            Some(DataConfig { csv, split })
        }
    };
    if generator_kind == GeneratorKind::Bootstrap && data.is_none() {
        return Err(Error::Config(
            "generator.kind = bootstrap requires data.csv".into(),
        ));
    }

    let eval_paths = k.usize("evaluation.paths", 100_000)?;
    if eval_paths == 0 {
        return Err(Error::Config("key 'evaluation.paths': must be >= 1".into()));
    }
    let seed_explicit = k.raw("evaluation.seed").is_some();
    let seed = k.u64("evaluation.seed", DEFAULT_SEED)?;

    let lsmc_degree = k.usize("lsmc.degree", 3)?;
    if lsmc_degree == 0 {
        return Err(Error::Config("key 'lsmc.degree': must be >= 1".into()));
    }

    Ok(ExperimentConfig {
        market,
        discount,
        generator_kind,
        hurst,
        harmonic,
        training,
        lsmc_degree,
        lsmc_fit_paths: k.usize("lsmc.fit_paths", 100_000)?,
        eval_paths,
        seed,
        seed_explicit,
        data,
        out_dir: k.raw("output.dir").map(PathBuf::from),
        checkpoint: k.raw("evaluation.checkpoint").map(PathBuf::from),
        report_inputs: k.raw("report.inputs").map(|v| {
            v.split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| PathBuf::from(s.trim()))
                .collect()
        }),
        sector: k.raw("report.sector").unwrap_or("Simulated").to_string(),
        asset: k.raw("report.asset").map(str::to_string),
    })
}
