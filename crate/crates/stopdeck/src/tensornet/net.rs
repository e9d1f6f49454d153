//! Fixed layer-stack network: valid 1-D convolutions, dense layers, and a
//! hand-written reverse pass.
//!
//! Batches are processed in fixed-size chunks. Chunks may run on any number
//! of threads; per-chunk arithmetic is sequential and the cross-chunk
//! gradient reduction follows chunk order, so results are bit-identical
//! regardless of parallelism.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensornet::Tensor;

/// Rows per processing chunk; fixed so the summation order never depends
/// on the thread count.
pub(crate) const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => sigmoid(v),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// One layer of the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// Valid 1-D convolution, stride 1: output width = width − kernel + 1.
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        activation: Activation,
    },
    /// Fully connected layer over a flat feature vector.
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
    /// Reinterprets (channels, width) as a flat vector of channels·width.
    Flatten,
}

impl LayerSpec {
    pub fn weight_count(&self) -> usize {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => out_channels * in_channels * kernel,
            LayerSpec::Dense {
                inputs, outputs, ..
            } => outputs * inputs,
            LayerSpec::Flatten => 0,
        }
    }

    pub fn bias_count(&self) -> usize {
        match *self {
            LayerSpec::Conv1d { out_channels, .. } => out_channels,
            LayerSpec::Dense { outputs, .. } => outputs,
            LayerSpec::Flatten => 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }

    /// (fan_in, fan_out) for initialization.
    fn fans(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => (in_channels * kernel, out_channels * kernel),
            LayerSpec::Dense {
                inputs, outputs, ..
            } => (inputs, outputs),
            LayerSpec::Flatten => (0, 0),
        }
    }

    fn output_shape(&self, index: usize, input: (usize, usize)) -> Result<(usize, usize)> {
        let (c, w) = input;
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => {
                if c != in_channels {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {index}: conv expects {in_channels} channels, input has {c}"
                    )));
                }
                if kernel == 0 || w < kernel {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {index}: conv kernel {kernel} does not fit input width {w}"
                    )));
                }
                Ok((out_channels, w - kernel + 1))
            }
            LayerSpec::Dense {
                inputs, outputs, ..
            } => {
                if c != 1 || w != inputs {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {index}: dense expects a flat vector of {inputs}, input is {c}x{w}"
                    )));
                }
                Ok((1, outputs))
            }
            LayerSpec::Flatten => Ok((1, c * w)),
        }
    }
}

/// A feed-forward stack with one flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_channels: usize,
    input_width: usize,
    layers: Vec<LayerSpec>,
    /// shapes[l] is the input shape of layer l; shapes[len] the output.
    shapes: Vec<(usize, usize)>,
    /// offsets[l] is where layer l's parameters start; offsets[len] = total.
    offsets: Vec<usize>,
    params: Vec<f64>,
}

impl Network {
    pub fn new(input_channels: usize, input_width: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput(
                "network needs at least one layer".into(),
            ));
        }
        let mut shapes = vec![(input_channels, input_width)];
        for (i, layer) in layers.iter().enumerate() {
            let next = layer.output_shape(i, shapes[i])?;
            shapes.push(next);
        }
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut total = 0;
        for layer in &layers {
            offsets.push(total);
            total += layer.param_count();
        }
        offsets.push(total);
        Ok(Network {
            input_channels,
            input_width,
            layers,
            shapes,
            offsets,
            params: vec![0.0; total],
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (self.input_channels, self.input_width)
    }

    pub fn output_dim(&self) -> usize {
        let (c, w) = self.shapes[self.layers.len()];
        c * w
    }

    pub fn param_len(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weight and bias slices of one layer.
    pub fn layer_params(&self, l: usize) -> (&[f64], &[f64]) {
        let spec = &self.layers[l];
        let start = self.offsets[l];
        let wlen = spec.weight_count();
        (
            &self.params[start..start + wlen],
            &self.params[start + wlen..start + wlen + spec.bias_count()],
        )
    }

    pub fn layer_params_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let spec = self.layers[l];
        let start = self.offsets[l];
        let wlen = spec.weight_count();
        let slice = &mut self.params[start..start + wlen + spec.bias_count()];
        slice.split_at_mut(wlen)
    }

    /// Xavier-uniform weights on [−√(6/(fan_in+fan_out)), +√(...)], biases
    /// zero; fully determined by `seed`.
    pub fn init_xavier(&mut self, seed: u64) {
        for l in 0..self.layers.len() {
            let (fan_in, fan_out) = self.layers[l].fans();
            if fan_in + fan_out == 0 {
                continue;
            }
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (weights, bias) = self.layer_params_mut(l);
            for (i, w) in weights.iter_mut().enumerate() {
                let u = rng::uniform_open01(rng::counter(seed, l as u64, i as u64));
                *w = (2.0 * u - 1.0) * limit;
            }
            for b in bias.iter_mut() {
                *b = 0.0;
            }
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<usize> {
        let (batch, per_sample) = input.batch_view()?;
        let expected = self.input_channels * self.input_width;
        if per_sample != expected {
            return Err(Error::ShapeMismatch(format!(
                "layer 0: input has {per_sample} values per sample, network expects {expected}"
            )));
        }
        Ok(batch)
    }

    /// Forward pass over a batch; returns outputs (row-major
    /// batch × output_dim) and the activation cache for `backward_batch`.
    pub fn forward_batch(&self, input: &Tensor) -> Result<(Vec<f64>, ForwardCache)> {
        let batch = self.check_input(input)?;
        let mut cache = ForwardCache::for_batch(self, batch);
        let out = self.forward_with_cache(input, &mut cache)?;
        Ok((out, cache))
    }

    /// Forward pass reusing a previously allocated cache.
    pub fn forward_with_cache(&self, input: &Tensor, cache: &mut ForwardCache) -> Result<Vec<f64>> {
        let batch = self.check_input(input)?;
        if cache.batch != batch || cache.dims.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "cache built for batch {}, forward called with batch {batch}",
                cache.batch
            )));
        }
        let in_dim = self.input_channels * self.input_width;
        input
            .data()
            .par_chunks(CHUNK * in_dim)
            .zip(cache.chunks.par_iter_mut())
            .for_each(|(in_chunk, chunk_cache)| {
                let rows = in_chunk.len() / in_dim;
                let mut src = in_chunk;
                for (l, act) in chunk_cache.acts.iter_mut().enumerate() {
                    let dst = &mut act[..rows * self.dim_out(l)];
                    self.apply_layer(l, rows, src, dst);
                    src = dst;
                }
            });
        let out_dim = self.output_dim();
        let mut out = vec![0.0; batch * out_dim];
        for (c, chunk_cache) in cache.chunks.iter().enumerate() {
            let rows = chunk_cache.rows;
            let last = &chunk_cache.acts[self.layers.len() - 1][..rows * out_dim];
            out[c * CHUNK * out_dim..c * CHUNK * out_dim + rows * out_dim].copy_from_slice(last);
        }
        Ok(out)
    }

    /// Forward pass without keeping activations.
    pub fn predict_batch(&self, input: &Tensor) -> Result<Vec<f64>> {
        let batch = self.check_input(input)?;
        let in_dim = self.input_channels * self.input_width;
        let out_dim = self.output_dim();
        let max_dim = self.max_dim();
        let mut out = vec![0.0; batch * out_dim];
        input
            .data()
            .par_chunks(CHUNK * in_dim)
            .zip(out.par_chunks_mut(CHUNK * out_dim))
            .for_each_init(
                || (vec![0.0; CHUNK * max_dim], vec![0.0; CHUNK * max_dim]),
                |(ping, pong), (in_chunk, out_chunk)| {
                    let rows = in_chunk.len() / in_dim;
                    let layers = self.layers.len();
                    for l in 0..layers {
                        let src: &[f64] = if l == 0 {
                            in_chunk
                        } else {
                            &ping[..rows * self.dim_in(l)]
                        };
                        if l + 1 == layers {
                            self.apply_layer(l, rows, src, out_chunk);
                        } else {
                            self.apply_layer(l, rows, src, &mut pong[..rows * self.dim_out(l)]);
                            std::mem::swap(ping, pong);
                        }
                    }
                },
            );
        Ok(out)
    }

    /// Accumulates dLoss/dparams into `grads` given the upstream gradient
    /// dLoss/doutput (row-major batch × output_dim).
    pub fn backward_batch(
        &self,
        input: &Tensor,
        cache: &ForwardCache,
        upstream: &[f64],
        grads: &mut [f64],
    ) -> Result<()> {
        let batch = self.check_input(input)?;
        if cache.batch != batch {
            return Err(Error::ShapeMismatch(format!(
                "cache holds batch {}, backward called with batch {batch}",
                cache.batch
            )));
        }
        let out_dim = self.output_dim();
        if upstream.len() != batch * out_dim {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient has {} values, expected batch {batch} x out {out_dim}",
                upstream.len()
            )));
        }
        if grads.len() != self.param_len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient buffer has {} values, expected {}",
                grads.len(),
                self.param_len()
            )));
        }
        let in_dim = self.input_channels * self.input_width;
        let partials: Vec<Vec<f64>> = input
            .data()
            .par_chunks(CHUNK * in_dim)
            .zip(cache.chunks.par_iter())
            .zip(upstream.par_chunks(CHUNK * out_dim))
            .map_init(
                || Scratch::for_network(self),
                |scratch, ((in_chunk, chunk_cache), up_chunk)| {
                    let mut local = vec![0.0; self.param_len()];
                    self.backward_chunk(in_chunk, chunk_cache, up_chunk, &mut local, scratch);
                    local
                },
            )
            .collect();
        for local in partials {
            for (g, l) in grads.iter_mut().zip(local.iter()) {
                *g += l;
            }
        }
        Ok(())
    }

    fn dim_in(&self, l: usize) -> usize {
        let (c, w) = self.shapes[l];
        c * w
    }

    fn dim_out(&self, l: usize) -> usize {
        let (c, w) = self.shapes[l + 1];
        c * w
    }

    fn max_dim(&self) -> usize {
        self.shapes.iter().map(|(c, w)| c * w).max().unwrap_or(0)
    }

    /// Applies layer `l` to `rows` samples; `input` is row-major
    /// rows × dim_in, `output` rows × dim_out. Conv activations are stored
    /// channel-major per sample, which makes Flatten a plain copy.
    fn apply_layer(&self, l: usize, rows: usize, input: &[f64], output: &mut [f64]) {
        match self.layers[l] {
            LayerSpec::Flatten => {
                output[..rows * self.dim_out(l)].copy_from_slice(&input[..rows * self.dim_in(l)]);
            }
            LayerSpec::Dense {
                inputs,
                outputs,
                activation,
            } => {
                let (weights, bias) = self.layer_params(l);
                let x = view2(&input[..rows * inputs], rows, inputs);
                let w = view2(weights, outputs, inputs);
                let out = &mut output[..rows * outputs];
                {
                    let mut y = view2_mut(out, rows, outputs);
                    general_mat_mul(1.0, &x, &w.t(), 0.0, &mut y);
                }
                for row in out.chunks_exact_mut(outputs) {
                    for (y, b) in row.iter_mut().zip(bias) {
                        *y = activation.apply(*y + b);
                    }
                }
            }
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                activation,
            } => {
                let (_, w_in) = self.shapes[l];
                let w_out = w_in - kernel + 1;
                let (weights, bias) = self.layer_params(l);
                for b in 0..rows {
                    let x = &input[b * in_channels * w_in..(b + 1) * in_channels * w_in];
                    let out = &mut output[b * out_channels * w_out..(b + 1) * out_channels * w_out];
                    for co in 0..out_channels {
                        let out_row = &mut out[co * w_out..(co + 1) * w_out];
                        out_row.fill(bias[co]);
                        for ci in 0..in_channels {
                            let w = &weights[(co * in_channels + ci) * kernel..][..kernel];
                            let x_row = &x[ci * w_in..(ci + 1) * w_in];
                            if kernel == 3 {
                                let (w0, w1, w2) = (w[0], w[1], w[2]);
                                for (p, o) in out_row.iter_mut().enumerate() {
                                    *o += w0 * x_row[p] + w1 * x_row[p + 1] + w2 * x_row[p + 2];
                                }
                            } else {
                                for (p, o) in out_row.iter_mut().enumerate() {
                                    let mut acc = 0.0;
                                    for (kk, wv) in w.iter().enumerate() {
                                        acc += wv * x_row[p + kk];
                                    }
                                    *o += acc;
                                }
                            }
                        }
                        for o in out_row.iter_mut() {
                            *o = activation.apply(*o);
                        }
                    }
                }
            }
        }
    }

    fn backward_chunk(
        &self,
        in_chunk: &[f64],
        cache: &ChunkCache,
        upstream: &[f64],
        grads: &mut [f64],
        s: &mut Scratch,
    ) {
        let rows = cache.rows;
        let layers = self.layers.len();
        s.delta[..upstream.len()].copy_from_slice(upstream);
        for l in (0..layers).rev() {
            let y = &cache.acts[l][..rows * self.dim_out(l)];
            let x: &[f64] = if l == 0 {
                in_chunk
            } else {
                &cache.acts[l - 1][..rows * self.dim_in(l)]
            };
            let start = self.offsets[l];
            let spec = self.layers[l];
            let wlen = spec.weight_count();
            let need_input_grad = l > 0;
            match spec {
                LayerSpec::Flatten => {
                    // identity: delta passes through unchanged
                    continue;
                }
                LayerSpec::Dense {
                    inputs,
                    outputs,
                    activation,
                } => {
                    let delta = &mut s.delta[..rows * outputs];
                    for (d, yv) in delta.iter_mut().zip(y) {
                        *d *= activation.grad_from_output(*yv);
                    }
                    {
                        let d = view2(delta, rows, outputs);
                        let xv = view2(&x[..rows * inputs], rows, inputs);
                        let (gw, gb) = grads[start..start + wlen + outputs].split_at_mut(wlen);
                        let mut gwv = view2_mut(gw, outputs, inputs);
                        general_mat_mul(1.0, &d.t(), &xv, 1.0, &mut gwv);
                        for drow in delta.chunks_exact(outputs) {
                            for (g, dv) in gb.iter_mut().zip(drow) {
                                *g += dv;
                            }
                        }
                    }
                    if need_input_grad {
                        let (weights, _) = self.layer_params(l);
                        let next = &mut s.delta_next[..rows * inputs];
                        let d = view2(delta, rows, outputs);
                        let w = view2(weights, outputs, inputs);
                        let mut nv = view2_mut(next, rows, inputs);
                        general_mat_mul(1.0, &d, &w, 0.0, &mut nv);
                        std::mem::swap(&mut s.delta, &mut s.delta_next);
                    }
                }
                LayerSpec::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    activation,
                } => {
                    let (_, w_in) = self.shapes[l];
                    let w_out = w_in - kernel + 1;
                    let delta = &mut s.delta[..rows * out_channels * w_out];
                    for (d, yv) in delta.iter_mut().zip(y) {
                        *d *= activation.grad_from_output(*yv);
                    }
                    let (weights, _) = self.layer_params(l);
                    let (gw, gb) = grads[start..start + wlen + out_channels].split_at_mut(wlen);
                    if need_input_grad {
                        s.delta_next[..rows * in_channels * w_in].fill(0.0);
                    }
                    for b in 0..rows {
                        let x = &x[b * in_channels * w_in..(b + 1) * in_channels * w_in];
                        let d = &delta[b * out_channels * w_out..(b + 1) * out_channels * w_out];
                        for co in 0..out_channels {
                            let d_row = &d[co * w_out..(co + 1) * w_out];
                            gb[co] += d_row.iter().sum::<f64>();
                            for ci in 0..in_channels {
                                let x_row = &x[ci * w_in..(ci + 1) * w_in];
                                let g = &mut gw[(co * in_channels + ci) * kernel..][..kernel];
                                for (kk, gv) in g.iter_mut().enumerate() {
                                    let mut acc = 0.0;
                                    for (p, dv) in d_row.iter().enumerate() {
                                        acc += dv * x_row[p + kk];
                                    }
                                    *gv += acc;
                                }
                            }
                        }
                        if need_input_grad {
                            let dx = &mut s.delta_next
                                [b * in_channels * w_in..(b + 1) * in_channels * w_in];
                            for co in 0..out_channels {
                                let d_row = &d[co * w_out..(co + 1) * w_out];
                                for ci in 0..in_channels {
                                    let w = &weights[(co * in_channels + ci) * kernel..][..kernel];
                                    let dx_row = &mut dx[ci * w_in..(ci + 1) * w_in];
                                    for (kk, wv) in w.iter().enumerate() {
                                        for (p, dv) in d_row.iter().enumerate() {
                                            dx_row[p + kk] += dv * wv;
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if need_input_grad {
                        std::mem::swap(&mut s.delta, &mut s.delta_next);
                    }
                }
            }
        }
    }
}

fn view2(data: &[f64], r: usize, c: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((r, c), data).expect("internal view shape")
}

fn view2_mut(data: &mut [f64], r: usize, c: usize) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape((r, c), data).expect("internal view shape")
}

/// Per-chunk activation storage for the backward pass.
#[derive(Debug)]
pub struct ForwardCache {
    batch: usize,
    dims: Vec<usize>,
    chunks: Vec<ChunkCache>,
}

#[derive(Debug)]
struct ChunkCache {
    rows: usize,
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn for_batch(net: &Network, batch: usize) -> Self {
        let dims: Vec<usize> = (0..net.layers.len()).map(|l| net.dim_out(l)).collect();
        let mut chunks = Vec::with_capacity(batch.div_ceil(CHUNK));
        let mut remaining = batch;
        while remaining > 0 {
            let rows = remaining.min(CHUNK);
            chunks.push(ChunkCache {
                rows,
                acts: dims.iter().map(|d| vec![0.0; rows * d]).collect(),
            });
            remaining -= rows;
        }
        ForwardCache {
            batch,
            dims,
            chunks,
        }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Reusable per-thread scratch buffers for the backward pass.
struct Scratch {
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl Scratch {
    fn for_network(net: &Network) -> Self {
        let max_dim = net.max_dim();
        Scratch {
            delta: vec![0.0; CHUNK * max_dim],
            delta_next: vec![0.0; CHUNK * max_dim],
        }
    }
}
