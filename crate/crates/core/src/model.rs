//! The staging network.
//!
//! Per window (1024 samples): a stack of residual feature blocks, each
//! `maxpool(convs(x) + skip1x1(x))`, halves the length until 4 positions
//! remain; the flattened features go through a dense layer. Across windows:
//! a dilated residual convolution stack (same padding) mixes context, and a
//! kernel-1 convolution gives 4 logits per window. Everything past the
//! dense layer is convolutional over the window axis, so one parameter set
//! serves any number of windows per input.

use serde::{Deserialize, Serialize};

use crate::tensorcore::init::{fan_in_uniform, rng};
use crate::tensorcore::ops::softmax_rows;
use crate::tensorcore::{Activation, Padding, ParamStore, Real, Tape, Tensor, Var};
use crate::{Error, Result, NUM_CLASSES, WINDOW_SAMPLES};

/// Skip path of a feature block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipPath {
    /// Kernel-1 convolution mapping M input channels to i filters.
    Conv1x1,
    /// Plain identity; only summable when M = i.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcnSpec {
    pub kernel: usize,
    pub filters: usize,
    pub dilations: Vec<usize>,
    pub stacks: usize,
}

impl TcnSpec {
    /// Windows seen by one output window: `1 + 2·Σd·(k−1)` per stack.
    pub fn receptive_field(&self) -> usize {
        let per_stack: usize = self.dilations.iter().sum::<usize>() * (self.kernel - 1) * 2;
        1 + self.stacks * per_stack
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Filters `i` per feature block.
    pub feature_filters: Vec<usize>,
    pub feature_kernel: usize,
    pub skip: SkipPath,
    pub per_window_feature_dim: usize,
    pub activation: Activation,
    pub dense_activation: Activation,
    pub tcn: TcnSpec,
    pub classes: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            feature_filters: vec![16, 16, 32, 32, 64, 64, 128, 256],
            feature_kernel: 3,
            skip: SkipPath::Conv1x1,
            per_window_feature_dim: 128,
            activation: Activation::Relu,
            dense_activation: Activation::Relu,
            tcn: TcnSpec {
                kernel: 7,
                filters: 128,
                dilations: vec![1, 2, 4, 8, 16, 32],
                stacks: 2,
            },
            classes: NUM_CLASSES,
        }
    }
}

impl ModelSpec {
    /// Narrow variant for tests and desk-scale runs.
    pub fn reduced() -> Self {
        Self {
            feature_filters: vec![4, 4, 8, 8, 16, 16, 32, 64],
            per_window_feature_dim: 32,
            tcn: TcnSpec {
                filters: 32,
                ..ModelSpec::default().tcn
            },
            ..ModelSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let blocks = self.feature_filters.len();
        if blocks == 0 || blocks >= 11 || WINDOW_SAMPLES % (1 << blocks) != 0 {
            return Err(Error::Config(format!(
                "{blocks} feature blocks cannot halve {WINDOW_SAMPLES} samples evenly"
            )));
        }
        if self.classes != NUM_CLASSES {
            return Err(Error::Config(format!("classes must be {NUM_CLASSES}, got {}", self.classes)));
        }
        if self.feature_kernel % 2 == 0 || self.tcn.kernel % 2 == 0 {
            return Err(Error::Config("same-padded kernels must have odd width".into()));
        }
        if self.feature_filters.iter().any(|&f| f == 0)
            || self.per_window_feature_dim == 0
            || self.tcn.filters == 0
            || self.tcn.dilations.iter().any(|&d| d == 0)
        {
            return Err(Error::Config("zero-width layer in model spec".into()));
        }
        for b in 0..blocks {
            self.block(b)?;
        }
        Ok(())
    }

    pub fn block(&self, index: usize) -> Result<AdaptedResBlock> {
        let m = if index == 0 { 1 } else { self.feature_filters[index - 1] };
        AdaptedResBlock::new(index, m, self.feature_filters[index], self.feature_kernel, self.skip)
    }

    /// Positions left per window after all feature blocks.
    pub fn positions_per_window(&self) -> usize {
        WINDOW_SAMPLES >> self.feature_filters.len()
    }

    /// Length of the flattened per-window feature vector before the dense layer.
    pub fn flat_features(&self) -> usize {
        self.positions_per_window() * self.feature_filters.last().copied().unwrap_or(0)
    }

    fn tcn_layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.tcn.stacks).flat_map(move |s| self.tcn.dilations.iter().enumerate().map(move |(l, &d)| (s, l, d)))
    }

    fn needs_tcn_projection(&self) -> bool {
        self.tcn.filters != self.per_window_feature_dim
    }

    /// Parameter names and shapes in creation order.
    pub fn param_shapes(&self) -> Result<Vec<(String, Vec<usize>)>> {
        self.validate()?;
        let mut out = Vec::new();
        for b in 0..self.feature_filters.len() {
            let blk = self.block(b)?;
            let k = blk.kernel;
            let p = |s: &str| format!("feature.{b}.{s}");
            out.push((p("conv1.weight"), vec![k, blk.m, blk.i]));
            out.push((p("conv1.bias"), vec![blk.i]));
            out.push((p("conv2.weight"), vec![k, blk.i, blk.i]));
            out.push((p("conv2.bias"), vec![blk.i]));
            out.push((p("conv3.weight"), vec![k, blk.i, blk.i]));
            out.push((p("conv3.bias"), vec![blk.i]));
            if blk.skip == SkipPath::Conv1x1 {
                out.push((p("skip_conv"), vec![1, blk.m, blk.i]));
                out.push((p("skip_bias"), vec![blk.i]));
            }
        }
        let f = self.per_window_feature_dim;
        out.push(("window_dense.weight".into(), vec![self.flat_features(), f]));
        out.push(("window_dense.bias".into(), vec![f]));
        let c = self.tcn.filters;
        if self.needs_tcn_projection() {
            out.push(("tcn.in_proj.weight".into(), vec![1, f, c]));
            out.push(("tcn.in_proj.bias".into(), vec![c]));
        }
        for (s, l, _) in self.tcn_layers() {
            for j in 1..=2 {
                out.push((format!("tcn.{s}.{l}.conv{j}.weight"), vec![self.tcn.kernel, c, c]));
                out.push((format!("tcn.{s}.{l}.conv{j}.bias"), vec![c]));
            }
        }
        out.push(("classifier.weight".into(), vec![1, c, self.classes]));
        out.push(("classifier.bias".into(), vec![self.classes]));
        Ok(out)
    }

    pub fn num_params(&self) -> Result<usize> {
        Ok(self
            .param_shapes()?
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum())
    }
}

/// Feature block: three same-padded convolutions with activation, a skip
/// path, their sum, then pairwise max-pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdaptedResBlock {
    pub index: usize,
    /// Input channels.
    pub m: usize,
    /// Filters.
    pub i: usize,
    pub kernel: usize,
    pub skip: SkipPath,
}

impl AdaptedResBlock {
    /// Fails for an identity skip with `m != i`: the input `(N, M)` and the
    /// branch output `(N, i)` cannot be summed.
    pub fn new(index: usize, m: usize, i: usize, kernel: usize, skip: SkipPath) -> Result<Self> {
        if skip == SkipPath::Identity && m != i {
            return Err(Error::Shape(format!(
                "feature block {index}: identity skip cannot sum input ({m} channels) with branch output ({i} channels)"
            )));
        }
        Ok(Self {
            index,
            m,
            i,
            kernel,
            skip,
        })
    }

    fn name(&self, s: &str) -> String {
        format!("feature.{}.{s}", self.index)
    }
}

/// Parameters placed on a tape, keyed by name.
pub struct BoundParams {
    vars: Vec<(String, Var)>,
}

impl BoundParams {
    pub fn bind<T: Real>(tape: &mut Tape<T>, params: &ParamStore<T>) -> Self {
        let vars = params
            .params()
            .iter()
            .map(|p| (p.name.clone(), tape.leaf(p.value.clone())))
            .collect();
        Self { vars }
    }

    /// Uses variables already on a tape, e.g. leaves under test.
    pub fn from_vars(vars: Vec<(String, Var)>) -> Self {
        Self { vars }
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Consistency(format!("missing parameter {name:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(n, v)| (n.as_str(), *v))
    }
}

/// One feature block on `x [batch, m, n]`, giving `[batch, i, n/2]`.
pub fn res_block_forward<T: Real>(
    tape: &mut Tape<T>,
    params: &BoundParams,
    block: &AdaptedResBlock,
    act: Activation,
    x: Var,
) -> Result<Var> {
    let n = tape.shape(x).get(2).copied().unwrap_or(0);
    if n % 2 != 0 {
        return Err(Error::Shape(format!("feature block {} got odd length {n}", block.index)));
    }
    let mut h = x;
    for j in 1..=3 {
        let w = params.var(&block.name(&format!("conv{j}.weight")))?;
        let b = params.var(&block.name(&format!("conv{j}.bias")))?;
        h = tape.conv1d(h, w, Some(b), 1, Padding::Same, act)?;
    }
    let skip = match block.skip {
        SkipPath::Conv1x1 => {
            let w = params.var(&block.name("skip_conv"))?;
            let b = params.var(&block.name("skip_bias"))?;
            tape.conv1d(x, w, Some(b), 1, Padding::Same, Activation::Identity)?
        }
        SkipPath::Identity => x,
    };
    let sum = tape.add(h, skip)?;
    tape.maxpool2(sum)
}

/// Builds the forward graph for `input [batch, q·1024]` and returns the
/// logits `[batch, q, classes]`.
pub fn forward_logits<T: Real>(
    tape: &mut Tape<T>,
    params: &BoundParams,
    spec: &ModelSpec,
    input: Var,
) -> Result<Var> {
    let &[batch, total] = tape.shape(input) else {
        return Err(Error::Shape(format!("model input must be [batch, q*1024], got {:?}", tape.shape(input))));
    };
    if total % WINDOW_SAMPLES != 0 {
        return Err(Error::Shape(format!("input length {total} is not a multiple of {WINDOW_SAMPLES}")));
    }
    let q = total / WINDOW_SAMPLES;

    let mut h = tape.reshape(input, &[batch * q, 1, WINDOW_SAMPLES])?;
    for b in 0..spec.feature_filters.len() {
        let block = spec.block(b)?;
        h = res_block_forward(tape, params, &block, spec.activation, h)?;
    }
    let h = tape.reshape(h, &[batch * q, spec.flat_features()])?;
    let h = tape.dense(
        h,
        params.var("window_dense.weight")?,
        Some(params.var("window_dense.bias")?),
        spec.dense_activation,
    )?;
    let h = tape.reshape(h, &[batch, q, spec.per_window_feature_dim])?;
    let mut h = tape.transpose12(h)?;

    if spec.needs_tcn_projection() {
        h = tape.conv1d(
            h,
            params.var("tcn.in_proj.weight")?,
            Some(params.var("tcn.in_proj.bias")?),
            1,
            Padding::Same,
            Activation::Identity,
        )?;
    }
    for (s, l, d) in spec.tcn_layers() {
        let mut branch = h;
        for j in 1..=2 {
            let w = params.var(&format!("tcn.{s}.{l}.conv{j}.weight"))?;
            let b = params.var(&format!("tcn.{s}.{l}.conv{j}.bias"))?;
            branch = tape.conv1d(branch, w, Some(b), d, Padding::Same, spec.activation)?;
        }
        h = tape.add(h, branch)?;
    }
    let logits = tape.conv1d(
        h,
        params.var("classifier.weight")?,
        Some(params.var("classifier.bias")?),
        1,
        Padding::Same,
        Activation::Identity,
    )?;
    tape.transpose12(logits)
}

/// Class probabilities `[batch, q, classes]` for `batch [batch, q·1024]`.
pub fn forward<T: Real>(params: &ParamStore<T>, spec: &ModelSpec, batch: &Tensor<T>) -> Result<Tensor<T>> {
    let logits = forward_logits_tensor(params, spec, batch)?;
    let shape = logits.shape().to_vec();
    Tensor::new(shape, softmax_rows(logits.data(), spec.classes))
}

pub fn forward_logits_tensor<T: Real>(
    params: &ParamStore<T>,
    spec: &ModelSpec,
    batch: &Tensor<T>,
) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, params);
    let input = tape.leaf(batch.clone());
    let logits = forward_logits(&mut tape, &bound, spec, input)?;
    Ok(tape.value(logits).clone())
}

/// Deterministic initialization. Layers followed by ReLU use He-uniform;
/// skip, residual-closing and output layers use LeCun-uniform so sums stay
/// near unit scale. Biases start at zero.
pub fn init_params<T: Real>(spec: &ModelSpec, seed: u64) -> Result<ParamStore<T>> {
    let shapes = spec.param_shapes()?;
    let mut r = rng(seed);
    let mut store = ParamStore::new();
    for (name, shape) in shapes {
        let value = if name.ends_with("bias") {
            Tensor::zeros(shape)
        } else {
            let fan_in = if shape.len() == 3 { shape[0] * shape[1] } else { shape[0] };
            let gain = init_gain(spec, &name);
            fan_in_uniform(&mut r, &shape, fan_in, gain)
        };
        store.insert(name, value)?;
    }
    Ok(store)
}

/// Variance gain for fan-in-uniform init (`bound = sqrt(gain / fan_in)`).
/// 6 ahead of a ReLU (He) and 3 for linear layers (LeCun). The two paths
/// into each feature-block sum get half of that, the closing convolution of
/// each context block a further fraction per layer, and the classifier a
/// small gain, so activations keep roughly unit scale without normalization
/// layers.
fn init_gain(spec: &ModelSpec, name: &str) -> f64 {
    let gain_for = |act: Activation| if act == Activation::Relu { 6.0 } else { 3.0 };
    let tcn_layers = (spec.tcn.stacks * spec.tcn.dilations.len()).max(1) as f64;
    if name.starts_with("classifier") {
        0.1
    } else if name.ends_with("skip_conv") {
        1.5
    } else if name.starts_with("tcn.in_proj") {
        3.0
    } else if name.starts_with("window_dense") {
        gain_for(spec.dense_activation)
    } else if name.starts_with("feature.") && name.contains(".conv3.") {
        gain_for(spec.activation) / 2.0
    } else if name.starts_with("tcn.") && name.contains(".conv2.") {
        gain_for(spec.activation) / (2.0 * tcn_layers)
    } else {
        gain_for(spec.activation)
    }
}

/// Checks a store against the names and shapes a spec expects.
pub fn check_params<T: Real>(spec: &ModelSpec, params: &ParamStore<T>) -> Result<()> {
    let shapes = spec.param_shapes()?;
    if shapes.len() != params.len() {
        return Err(Error::SpecMismatch(format!(
            "spec expects {} tensors, store has {}",
            shapes.len(),
            params.len()
        )));
    }
    for (name, shape) in shapes {
        match params.get(&name) {
            Some(t) if t.shape() == shape.as_slice() => {}
            Some(t) => {
                return Err(Error::SpecMismatch(format!(
                    "{name}: spec shape {shape:?}, stored {:?}",
                    t.shape()
                )))
            }
            None => return Err(Error::SpecMismatch(format!("{name} missing from store"))),
        }
    }
    Ok(())
}
