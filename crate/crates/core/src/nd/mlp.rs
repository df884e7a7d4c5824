//! Fully connected noise-prediction network with a hand-written backward pass.
//!
//! The network input is the concatenation `[x; emb(t); cond]` where `emb` is a
//! sinusoidal time embedding and `cond` an optional conditioning vector (one-hot
//! class labels in this crate). Weights are stored row-major `(out, in)`.

use serde::{Deserialize, Serialize};

use super::params::{ParamBlock, ParamVector};
use super::rng::Rng;
use crate::error::{ensure_dim, ensure_finite, Error, Result};

const MIN_FREQ: f64 = 1.0;
const MAX_FREQ: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Silu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Silu => z / (1.0 + (-z).exp()),
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub time_embedding_dim: usize,
    #[serde(default)]
    pub condition_dim: usize,
}

impl MlpSpec {
    /// Default noise predictor for `dim`-dimensional data: three hidden layers of 128, SiLU.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            input_dim: dim,
            hidden_dims: vec![128, 128, 128],
            output_dim: dim,
            activation: Activation::Silu,
            time_embedding_dim: 16,
            condition_dim: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidArgument(
                "network input and output widths must be positive".into(),
            ));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument(
                "hidden widths must be positive".into(),
            ));
        }
        if self.time_embedding_dim == 0 || !self.time_embedding_dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "time embedding width must be positive and even, got {}",
                self.time_embedding_dim
            )));
        }
        Ok(())
    }

    /// Width of the first layer's input.
    pub fn first_layer_width(&self) -> usize {
        self.input_dim + self.time_embedding_dim + self.condition_dim
    }

    /// `(in, out)` for every linear layer in order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.first_layer_width()];
        widths.extend(&self.hidden_dims);
        widths.push(self.output_dim);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn layout(&self) -> Vec<ParamBlock> {
        self.layer_dims()
            .into_iter()
            .enumerate()
            .flat_map(|(l, (fan_in, fan_out))| {
                [
                    ParamBlock::new(format!("layer{l}.weight"), vec![fan_out, fan_in]),
                    ParamBlock::new(format!("layer{l}.bias"), vec![fan_out]),
                ]
            })
            .collect()
    }
}

/// Writes the sinusoidal embedding of `t` into `out` (`out.len()` even):
/// `[sin(w_0 t), .., sin(w_{h-1} t), cos(w_0 t), .., cos(w_{h-1} t)]` with
/// frequencies spaced geometrically between 1 and 50.
pub fn time_embedding_into(t: f64, out: &mut [f64]) {
    let half = out.len() / 2;
    for k in 0..half {
        let w = if half == 1 {
            MIN_FREQ
        } else {
            MIN_FREQ * (MAX_FREQ / MIN_FREQ).powf(k as f64 / (half - 1) as f64)
        };
        out[k] = (w * t).sin();
        out[half + k] = (w * t).cos();
    }
}

pub fn time_embedding(t: f64, width: usize) -> Vec<f64> {
    let mut out = vec![0.0; width];
    time_embedding_into(t, &mut out);
    out
}

/// Activations kept from a batched forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `inputs[l]` is the `(batch, in_l)` input to layer `l`.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// An MLP noise predictor `eps(x, t, cond)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreNet {
    pub spec: MlpSpec,
    pub params: ParamVector,
}

impl ScoreNet {
    /// Xavier-uniform weights, zero biases.
    pub fn new(spec: MlpSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let mut params = ParamVector::zeros(spec.layout());
        for (l, (fan_in, fan_out)) in spec.layer_dims().into_iter().enumerate() {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in params.block_mut(2 * l) {
                *w = rng.uniform_range(-a, a);
            }
        }
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: MlpSpec, params: ParamVector) -> Result<Self> {
        spec.validate()?;
        if params.layout != spec.layout() {
            return Err(Error::InvalidArgument(
                "parameter layout does not match network spec".into(),
            ));
        }
        Ok(Self { spec, params })
    }

    /// Zeroes the output layer so the untrained network predicts exactly zero.
    pub fn with_zero_output(mut self) -> Self {
        let last = self.spec.layer_dims().len() - 1;
        self.params.block_mut(2 * last).fill(0.0);
        self.params.block_mut(2 * last + 1).fill(0.0);
        self
    }

    fn check_sample(&self, x: &[f64], t: f64, cond: Option<&[f64]>) -> Result<()> {
        ensure_dim("network input", self.spec.input_dim, x.len())?;
        ensure_finite("network input", x)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("time {t} outside [0, 1]")));
        }
        match (cond, self.spec.condition_dim) {
            (None, 0) => Ok(()),
            (Some(c), n) if n > 0 => {
                ensure_dim("condition", n, c.len())?;
                ensure_finite("condition", c)
            }
            (None, n) => Err(Error::Contract(format!(
                "network expects a condition of width {n} but none was given"
            ))),
            (Some(_), _) => Err(Error::Contract(
                "condition given to an unconditional network".into(),
            )),
        }
    }

    /// Assembles the `(batch, first_layer_width)` input matrix.
    fn assemble(&self, xs: &[f64], ts: &[f64], conds: Option<&[f64]>) -> Vec<f64> {
        let spec = &self.spec;
        let width = spec.first_layer_width();
        let (d, e, c) = (spec.input_dim, spec.time_embedding_dim, spec.condition_dim);
        let batch = ts.len();
        let mut a = vec![0.0; batch * width];
        for b in 0..batch {
            let row = &mut a[b * width..(b + 1) * width];
            row[..d].copy_from_slice(&xs[b * d..(b + 1) * d]);
            time_embedding_into(ts[b], &mut row[d..d + e]);
            if let Some(conds) = conds {
                row[d + e..].copy_from_slice(&conds[b * c..(b + 1) * c]);
            }
        }
        a
    }

    fn run(&self, xs: &[f64], ts: &[f64], conds: Option<&[f64]>, keep: bool) -> ForwardCache {
        let batch = ts.len();
        let dims = self.spec.layer_dims();
        let n_layers = dims.len();
        let mut inputs = Vec::with_capacity(if keep { n_layers } else { 0 });
        let mut pre = Vec::new();
        let mut current = self.assemble(xs, ts, conds);
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let w = self.params.block(2 * l);
            let bias = self.params.block(2 * l + 1);
            let mut z = vec![0.0; batch * fan_out];
            for b in 0..batch {
                let a_row = &current[b * fan_in..(b + 1) * fan_in];
                let z_row = &mut z[b * fan_out..(b + 1) * fan_out];
                for o in 0..fan_out {
                    let w_row = &w[o * fan_in..(o + 1) * fan_in];
                    z_row[o] = bias[o] + dot(w_row, a_row);
                }
            }
            let next = if l + 1 < n_layers {
                let act = self.spec.activation;
                let a: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
                if keep {
                    pre.push(z);
                }
                a
            } else {
                z
            };
            if keep {
                inputs.push(std::mem::replace(&mut current, next));
            } else {
                current = next;
            }
        }
        ForwardCache {
            batch,
            inputs,
            pre,
            output: current,
        }
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64], t: f64, cond: Option<&[f64]>) -> Result<Vec<f64>> {
        self.check_sample(x, t, cond)?;
        Ok(self.run(x, &[t], cond, false).output)
    }

    /// Batched forward pass. `xs` is `(batch, input_dim)` row-major, one time per row,
    /// `conds` is `(batch, condition_dim)` when present.
    pub fn forward_batch(&self, xs: &[f64], ts: &[f64], conds: Option<&[f64]>) -> Result<Vec<f64>> {
        self.check_batch(xs, ts, conds)?;
        Ok(self.run(xs, ts, conds, false).output)
    }

    /// Batched forward pass retaining what [`ScoreNet::backward_batch`] needs.
    pub fn forward_train(
        &self,
        xs: &[f64],
        ts: &[f64],
        conds: Option<&[f64]>,
    ) -> Result<ForwardCache> {
        self.check_batch(xs, ts, conds)?;
        Ok(self.run(xs, ts, conds, true))
    }

    fn check_batch(&self, xs: &[f64], ts: &[f64], conds: Option<&[f64]>) -> Result<()> {
        let d = self.spec.input_dim;
        let c = self.spec.condition_dim;
        ensure_dim("batched network input", ts.len() * d, xs.len())?;
        if let Some(cs) = conds {
            ensure_dim("batched condition", ts.len() * c, cs.len())?;
        }
        for (b, &t) in ts.iter().enumerate() {
            let cond = conds.map(|cs| &cs[b * c..(b + 1) * c]);
            self.check_sample(&xs[b * d..(b + 1) * d], t, cond)?;
        }
        Ok(())
    }

    /// Accumulates `d<upstream, output>/d params` summed over the batch into `grad`.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        grad: &mut ParamVector,
    ) -> Result<()> {
        let batch = cache.batch;
        ensure_dim(
            "upstream gradient",
            batch * self.spec.output_dim,
            upstream.len(),
        )?;
        if !grad.same_layout(&self.params) {
            return Err(Error::InvalidArgument("gradient layout mismatch".into()));
        }
        let dims = self.spec.layer_dims();
        let mut delta = upstream.to_vec();
        for l in (0..dims.len()).rev() {
            let (fan_in, fan_out) = dims[l];
            let input = &cache.inputs[l];
            {
                let gw = grad.block_mut(2 * l);
                for b in 0..batch {
                    let a_row = &input[b * fan_in..(b + 1) * fan_in];
                    for o in 0..fan_out {
                        let g = delta[b * fan_out + o];
                        if g != 0.0 {
                            axpy(g, a_row, &mut gw[o * fan_in..(o + 1) * fan_in]);
                        }
                    }
                }
            }
            {
                let gb = grad.block_mut(2 * l + 1);
                for b in 0..batch {
                    for o in 0..fan_out {
                        gb[o] += delta[b * fan_out + o];
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = self.params.block(2 * l);
            let mut prev = vec![0.0; batch * fan_in];
            for b in 0..batch {
                let p_row = &mut prev[b * fan_in..(b + 1) * fan_in];
                for o in 0..fan_out {
                    let g = delta[b * fan_out + o];
                    if g != 0.0 {
                        axpy(g, &w[o * fan_in..(o + 1) * fan_in], p_row);
                    }
                }
            }
            let act = self.spec.activation;
            for (p, &z) in prev.iter_mut().zip(&cache.pre[l - 1]) {
                *p *= act.derivative(z);
            }
            delta = prev;
        }
        Ok(())
    }

    /// Gradient of `<upstream, forward(x, t, cond)>` with respect to every parameter.
    pub fn backward(
        &self,
        x: &[f64],
        t: f64,
        cond: Option<&[f64]>,
        upstream: &[f64],
    ) -> Result<ParamVector> {
        self.check_sample(x, t, cond)?;
        ensure_dim("upstream gradient", self.spec.output_dim, upstream.len())?;
        let cache = self.run(x, &[t], cond, true);
        let mut grad = self.params.zeros_like();
        self.backward_batch(&cache, upstream, &mut grad)?;
        Ok(grad)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
