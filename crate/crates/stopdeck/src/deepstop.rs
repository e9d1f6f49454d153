//! Stopping-policy learning: state construction from price history, the
//! convolutional policy network, backward-recursive training, and policy
//! evaluation.
//!
//! Training maximizes, step by step backwards in time, the mean of
//! `p_t · a_t + g · (1 − a_t)` where `a_t` is the network's stop
//! probability and `g` is the payoff realized by the current policy from
//! later steps (held fixed per step and updated with the hard 0.5-threshold
//! decision). One optimizer step is taken per epoch on the accumulated
//! loss; the terminal decision is forced to exercise.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::EvalStats;
use crate::error::{Error, Result};
use crate::market::{payoff_matrix, Grid, MarketParams, PathBatch};
use crate::rng;
use crate::simulate::{generate, GeneratorSpec};
use crate::tensornet::{
    load_checkpoint, save_checkpoint, Activation, AdamState, Checkpoint, ForwardCache, LayerSpec,
    MomentumState, Network, Optimizer, Tensor,
};

/// Channels of the policy state tensor: returns history, payoff/K, t/N,
/// rate, and strike/s0.
pub const STATE_CHANNELS: usize = 5;

/// Evaluation processes paths in fixed blocks so peak memory stays flat.
const EVAL_BLOCK: usize = 8192;

/// Policy-network architecture. The defaults give two six-map kernel-3
/// convolutions over a 25-step window (feature maps of 23 then 21), two
/// dense layers of 50, and a single sigmoid output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub window: usize,
    pub channels: usize,
    pub conv1_maps: usize,
    pub conv2_maps: usize,
    pub kernel: usize,
    pub dense1: usize,
    pub dense2: usize,
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec {
            window: 25,
            channels: STATE_CHANNELS,
            conv1_maps: 6,
            conv2_maps: 6,
            kernel: 3,
            dense1: 50,
            dense2: 50,
        }
    }
}

impl PolicySpec {
    pub fn with_window(window: usize) -> Self {
        PolicySpec {
            window,
            ..PolicySpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel < 2 {
            return Err(Error::InvalidInput(format!(
                "kernel must be >= 2, got {}",
                self.kernel
            )));
        }
        let shrink = 2 * (self.kernel - 1);
        if self.window < shrink + 1 {
            return Err(Error::InvalidInput(format!(
                "window {} too small: two valid kernel-{} convolutions need at least {}",
                self.window,
                self.kernel,
                shrink + 1
            )));
        }
        for (name, v) in [
            ("channels", self.channels),
            ("conv1_maps", self.conv1_maps),
            ("conv2_maps", self.conv2_maps),
            ("dense1", self.dense1),
            ("dense2", self.dense2),
        ] {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    /// Flattened feature count after both valid convolutions.
    pub fn flat_features(&self) -> usize {
        self.conv2_maps * (self.window - 2 * (self.kernel - 1))
    }

    /// Builds the policy network with Xavier-uniform weights.
    pub fn build_network(&self, seed: u64) -> Result<Network> {
        self.validate()?;
        let mut net = Network::new(
            self.channels,
            self.window,
            vec![
                LayerSpec::Conv1d {
                    in_channels: self.channels,
                    out_channels: self.conv1_maps,
                    kernel: self.kernel,
                    activation: Activation::Relu,
                },
                LayerSpec::Conv1d {
                    in_channels: self.conv1_maps,
                    out_channels: self.conv2_maps,
                    kernel: self.kernel,
                    activation: Activation::Relu,
                },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    inputs: self.flat_features(),
                    outputs: self.dense1,
                    activation: Activation::Relu,
                },
                LayerSpec::Dense {
                    inputs: self.dense1,
                    outputs: self.dense2,
                    activation: Activation::Relu,
                },
                LayerSpec::Dense {
                    inputs: self.dense2,
                    outputs: 1,
                    activation: Activation::Sigmoid,
                },
            ],
        )?;
        net.init_xavier(seed);
        Ok(net)
    }

    /// Recovers the spec from a stored layer stack.
    fn from_network(net: &Network) -> Result<PolicySpec> {
        let (channels, window) = net.input_shape();
        match net.layers() {
            [LayerSpec::Conv1d {
                out_channels: c1,
                kernel,
                ..
            }, LayerSpec::Conv1d {
                out_channels: c2, ..
            }, LayerSpec::Flatten, LayerSpec::Dense { outputs: d1, .. }, LayerSpec::Dense { outputs: d2, .. }, LayerSpec::Dense { outputs: 1, .. }] => {
                Ok(PolicySpec {
                    window,
                    channels,
                    conv1_maps: *c1,
                    conv2_maps: *c2,
                    kernel: *kernel,
                    dense1: *d1,
                    dense2: *d2,
                })
            }
            _ => Err(Error::Checkpoint(
                "layer stack is not a stopping-policy network".into(),
            )),
        }
    }
}

/// Optimizer selection for training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Adam {
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
    Momentum {
        learning_rate: f64,
        momentum: f64,
    },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    fn build(&self, param_len: usize) -> Result<Optimizer> {
        match *self {
            OptimizerConfig::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
            } => Ok(Optimizer::Adam(AdamState::new(
                learning_rate,
                beta1,
                beta2,
                epsilon,
                param_len,
            )?)),
            OptimizerConfig::Momentum {
                learning_rate,
                momentum,
            } => Ok(Optimizer::Momentum(MomentumState::new(
                learning_rate,
                momentum,
                param_len,
            )?)),
        }
    }
}

/// How a policy is trained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch: usize,
    pub window: usize,
    pub optimizer: OptimizerConfig,
    /// Use time-0 discounted payoffs in states, loss, and evaluation.
    pub discount: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 300,
            batch: 8192,
            window: 25,
            optimizer: OptimizerConfig::default(),
            discount: true,
        }
    }
}

/// Per-epoch training trace entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// mean(g) after the backward sweep: the policy's payoff estimate.
    pub mean_payoff: f64,
    pub loss: f64,
}

/// A trained stopping policy.
#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub spec: PolicySpec,
    net: Network,
    pub optimizer: Option<Optimizer>,
    pub config_hash: u64,
    pub discount: bool,
    pub trace: Vec<EpochRecord>,
}

impl TrainedPolicy {
    /// Wraps an existing policy-shaped network; used by tests and loading.
    pub fn from_network(net: Network, discount: bool) -> Result<TrainedPolicy> {
        let spec = PolicySpec::from_network(&net)?;
        Ok(TrainedPolicy {
            spec,
            net,
            optimizer: None,
            config_hash: 0,
            discount,
            trace: Vec::new(),
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    /// Saves parameters, optimizer state, and the config fingerprint; the
    /// epoch trace lives in the separate trace CSV, not the checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(
            &Checkpoint {
                network: self.net.clone(),
                optimizer: self.optimizer.clone(),
                config_hash: self.config_hash,
            },
            path,
        )
    }

    /// Loads a checkpoint. The discount convention is not part of the
    /// checkpoint contract; it defaults to ON and can be overridden.
    pub fn load(path: &Path) -> Result<TrainedPolicy> {
        let ckpt = load_checkpoint(path)?;
        let spec = PolicySpec::from_network(&ckpt.network)?;
        Ok(TrainedPolicy {
            spec,
            net: ckpt.network,
            optimizer: ckpt.optimizer,
            config_hash: ckpt.config_hash,
            discount: true,
            trace: Vec::new(),
        })
    }
}

/// Builds the `batch × channels × window` state tensor observed at step `t`.
///
/// Channel 0 holds the last W relative returns ending at `t`, left-padded
/// with 1.0 before the first observed return; channel 1 the (optionally
/// discounted) payoff over strike; channel 2 the time feature t/N; channels
/// 3 and 4 broadcast the rate and strike/s0.
pub fn build_state(
    paths: &PathBatch,
    t: usize,
    params: &MarketParams,
    window: usize,
    discount: bool,
) -> Result<Tensor> {
    if t < 1 || t > paths.steps() {
        return Err(Error::InvalidInput(format!(
            "step {t} out of range 1..={}",
            paths.steps()
        )));
    }
    if window == 0 {
        return Err(Error::InvalidInput("window must be >= 1".into()));
    }
    let grid = payoff_matrix(paths, params, discount)?;
    let batch = paths.batch();
    let mut state = Tensor::zeros(vec![batch, STATE_CHANNELS, window]);
    fill_state_batch(&mut state, paths, &grid, t, params, window);
    Ok(state)
}

/// Fills an existing state tensor in place (rows run in parallel).
fn fill_state_batch(
    state: &mut Tensor,
    paths: &PathBatch,
    grid: &Grid,
    t: usize,
    params: &MarketParams,
    window: usize,
) {
    let n = paths.steps();
    let row_len = STATE_CHANNELS * window;
    let strike = params.strike;
    let rate = params.rate;
    let moneyness = params.strike / params.s0;
    let time_feature = t as f64 / n as f64;
    state
        .data_mut()
        .par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, out)| {
            fill_state_row(
                out,
                paths.row(i),
                grid.value(i, t) / strike,
                time_feature,
                rate,
                moneyness,
                t,
                window,
            );
        });
}

#[allow(clippy::too_many_arguments)]
fn fill_state_row(
    out: &mut [f64],
    prices: &[f64],
    p_over_k: f64,
    time_feature: f64,
    rate: f64,
    moneyness: f64,
    t: usize,
    window: usize,
) {
    let (returns, rest) = out.split_at_mut(window);
    for (j, r) in returns.iter_mut().enumerate() {
        // u is the 1-based index of the return filling slot j; the slot
        // for the most recent return (j = window-1) holds S_t / S_{t-1}
        let u = (t + 1 + j).saturating_sub(window);
        *r = if u >= 1 {
            prices[u] / prices[u - 1]
        } else {
            1.0
        };
    }
    let (payoff_ch, rest) = rest.split_at_mut(window);
    payoff_ch.fill(p_over_k);
    let (time_ch, rest) = rest.split_at_mut(window);
    time_ch.fill(time_feature);
    let (rate_ch, money_ch) = rest.split_at_mut(window);
    rate_ch.fill(rate);
    money_ch.fill(moneyness);
}

/// Head output of the policy for a batch of states; the decision rule is
/// stop iff the probability strictly exceeds 0.5.
pub fn stop_probability(policy: &TrainedPolicy, state: &Tensor) -> Result<Vec<f64>> {
    let shape = state.shape();
    if shape.len() != 3 || shape[1] != policy.spec.channels || shape[2] != policy.spec.window {
        return Err(Error::ShapeMismatch(format!(
            "state shape {:?} does not match policy expecting [batch, {}, {}]",
            shape, policy.spec.channels, policy.spec.window
        )));
    }
    policy.net.predict_batch(state)
}

/// One backward-in-time sweep over a fixed path batch: accumulated loss,
/// parameter gradients, the final per-path payoff vector g, and optionally
/// the g vector seen by each step's loss, in sweep order t = N−1 .. 1.
pub(crate) struct EpochPass {
    pub loss: f64,
    pub grads: Vec<f64>,
    pub g: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub g_per_step: Option<Vec<Vec<f64>>>,
}

pub(crate) fn epoch_pass(
    net: &Network,
    paths: &PathBatch,
    grid: &Grid,
    params: &MarketParams,
    window: usize,
    record_g: bool,
    epoch: usize,
) -> Result<EpochPass> {
    let n = paths.steps();
    let batch = paths.batch();
    let mut g: Vec<f64> = (0..batch).map(|i| grid.value(i, n)).collect();
    let mut g_per_step = record_g.then(Vec::new);
    let mut grads = vec![0.0; net.param_len()];
    let mut state = Tensor::zeros(vec![batch, STATE_CHANNELS, window]);
    let mut cache = ForwardCache::for_batch(net, batch);
    let mut upstream = vec![0.0; batch];
    let mut loss = 0.0;
    let inv_batch = 1.0 / batch as f64;
    for t in (1..n).rev() {
        fill_state_batch(&mut state, paths, grid, t, params, window);
        let probs = net.forward_with_cache(&state, &mut cache)?;
        if let Some(trace) = g_per_step.as_mut() {
            trace.push(g.clone());
        }
        let mut step_value = 0.0;
        for i in 0..batch {
            let p = grid.value(i, t);
            let a = probs[i];
            step_value += p * a + g[i] * (1.0 - a);
            upstream[i] = -(p - g[i]) * inv_batch;
        }
        loss -= step_value * inv_batch;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, step: t });
        }
        net.backward_batch(&state, &cache, &upstream, &mut grads)?;
        for i in 0..batch {
            if probs[i] > 0.5 {
                g[i] = grid.value(i, t);
            }
        }
    }
    Ok(EpochPass {
        loss,
        grads,
        g,
        g_per_step,
    })
}

/// The epoch loss re-evaluated with a frozen continuation sequence; this is
/// exactly the functional whose gradient `epoch_pass` accumulates, so it is
/// what finite differences must probe.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn epoch_loss_frozen(
    net: &Network,
    paths: &PathBatch,
    grid: &Grid,
    params: &MarketParams,
    window: usize,
    g_per_step: &[Vec<f64>],
) -> Result<f64> {
    let n = paths.steps();
    let batch = paths.batch();
    let mut state = Tensor::zeros(vec![batch, STATE_CHANNELS, window]);
    let mut loss = 0.0;
    let inv_batch = 1.0 / batch as f64;
    for (k, t) in (1..n).rev().enumerate() {
        fill_state_batch(&mut state, paths, grid, t, params, window);
        let probs = net.predict_batch(&state)?;
        let g = &g_per_step[k];
        let mut step_value = 0.0;
        for i in 0..batch {
            let p = grid.value(i, t);
            step_value += p * probs[i] + g[i] * (1.0 - probs[i]);
        }
        loss -= step_value * inv_batch;
    }
    Ok(loss)
}

fn config_fingerprint(
    gen: &GeneratorSpec,
    params: &MarketParams,
    cfg: &TrainingConfig,
    seed: u64,
) -> u64 {
    let text = format!(
        "gen={};s0={};strike={};maturity={};rate={};dividend={};sigma={};steps={};kind={};\
         epochs={};batch={};window={};optimizer={:?};discount={};seed={}",
        gen.tag(),
        params.s0,
        params.strike,
        params.maturity,
        params.rate,
        params.dividend,
        params.sigma,
        params.steps,
        params.option_kind.as_str(),
        cfg.epochs,
        cfg.batch,
        cfg.window,
        cfg.optimizer,
        cfg.discount,
        seed
    );
    rng::fnv1a(text.as_bytes())
}

/// Trains a stopping policy by backward recursion over freshly generated
/// path batches, one optimizer step per epoch.
pub fn train(
    gen: &GeneratorSpec,
    params: &MarketParams,
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<TrainedPolicy> {
    params.validate()?;
    gen.validate()?;
    if cfg.batch == 0 {
        return Err(Error::InvalidInput("batch must be >= 1".into()));
    }
    let spec = PolicySpec::with_window(cfg.window);
    let mut net = spec.build_network(rng::derive_seed(seed, rng::STREAM_INIT, 0))?;
    let mut optimizer = cfg.optimizer.build(net.param_len())?;
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let paths = generate(
            gen,
            params,
            cfg.batch,
            rng::derive_seed(seed, rng::STREAM_EPOCH, epoch as u64),
        )?;
        let grid = payoff_matrix(&paths, params, cfg.discount)?;
        let pass = epoch_pass(&net, &paths, &grid, params, cfg.window, false, epoch)?;
        optimizer.apply(net.params_mut(), &pass.grads);
        let mean_payoff = pass.g.iter().sum::<f64>() / cfg.batch as f64;
        trace.push(EpochRecord {
            epoch,
            mean_payoff,
            loss: pass.loss,
        });
    }
    Ok(TrainedPolicy {
        spec,
        net,
        optimizer: Some(optimizer),
        config_hash: config_fingerprint(gen, params, cfg, seed),
        discount: cfg.discount,
        trace,
    })
}

/// Evaluates a policy on a path batch with the forward first-crossing scan:
/// stop at the first interior step whose probability exceeds 0.5, otherwise
/// collect the terminal payoff.
pub fn evaluate(
    policy: &TrainedPolicy,
    paths: &PathBatch,
    params: &MarketParams,
) -> Result<EvalStats> {
    let grid = payoff_matrix(paths, params, policy.discount)?;
    let n = paths.steps();
    let batch = paths.batch();
    let window = policy.spec.window;
    let mut payoffs = vec![0.0; batch];
    let mut block_start = 0;
    while block_start < batch {
        let block = (batch - block_start).min(EVAL_BLOCK);
        let mut alive: Vec<usize> = (block_start..block_start + block).collect();
        for t in 1..n {
            if alive.is_empty() {
                break;
            }
            let state = gather_state(paths, &grid, &alive, t, params, window);
            let probs = policy.net.predict_batch(&state)?;
            let mut kept = Vec::with_capacity(alive.len());
            for (row, &path) in alive.iter().enumerate() {
                if probs[row] > 0.5 {
                    payoffs[path] = grid.value(path, t);
                } else {
                    kept.push(path);
                }
            }
            alive = kept;
        }
        for path in alive {
            payoffs[path] = grid.value(path, n);
        }
        block_start += block;
    }
    Ok(EvalStats::from_samples(&payoffs))
}

/// Builds the state tensor for an arbitrary subset of paths.
fn gather_state(
    paths: &PathBatch,
    grid: &Grid,
    subset: &[usize],
    t: usize,
    params: &MarketParams,
    window: usize,
) -> Tensor {
    let n = paths.steps();
    let row_len = STATE_CHANNELS * window;
    let mut state = Tensor::zeros(vec![subset.len(), STATE_CHANNELS, window]);
    let strike = params.strike;
    let rate = params.rate;
    let moneyness = params.strike / params.s0;
    let time_feature = t as f64 / n as f64;
    state
        .data_mut()
        .par_chunks_mut(row_len)
        .zip(subset.par_iter())
        .for_each(|(out, &path)| {
            fill_state_row(
                out,
                paths.row(path),
                grid.value(path, t) / strike,
                time_feature,
                rate,
                moneyness,
                t,
                window,
            );
        });
    state
}
