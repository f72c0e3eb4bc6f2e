//! Dense feedforward network with a flat parameter vector.
//!
//! Layer `l` maps `fan_in -> fan_out` and owns `fan_out * fan_in` weights
//! (row-major, one row per output unit) followed by `fan_out` biases. Hidden
//! layers apply the activation; the output layer is linear.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

/// Pre- and post-activation values of every layer for one input.
#[derive(Debug, Clone, Default)]
pub(crate) struct Trace {
    /// `acts[0]` is the input; `acts[l+1]` the output of layer `l`.
    pub acts: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn parameter_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl Mlp {
    /// Weights drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero.
    pub fn init<R: Rng + ?Sized>(layer_sizes: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        Self::check_sizes(layer_sizes)?;
        let mut params = Vec::with_capacity(parameter_count(layer_sizes));
        for w in layer_sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)));
            params.extend(std::iter::repeat(0.0).take(w[1]));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            params,
        })
    }

    pub fn from_parts(layer_sizes: Vec<usize>, activation: Activation, params: Vec<f64>) -> Result<Self> {
        Self::check_sizes(&layer_sizes)?;
        let expected = parameter_count(&layer_sizes);
        if params.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for layers {layer_sizes:?}, expected {expected}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("non-finite network parameter".into()));
        }
        Ok(Self {
            layer_sizes,
            activation,
            params,
        })
    }

    fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Validation(format!(
                "need at least input and output layers of positive width, got {layer_sizes:?}"
            )));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut trace = Trace::default();
        self.forward_trace(input, &mut trace);
        trace.acts.pop().unwrap_or_default()
    }

    pub(crate) fn forward_trace(&self, input: &[f64], trace: &mut Trace) {
        let n_layers = self.layer_sizes.len() - 1;
        trace.acts.resize_with(n_layers + 1, Vec::new);
        trace.pre.resize_with(n_layers, Vec::new);
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(input);
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let bias = &self.params[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
            offset += (fan_in + 1) * fan_out;
            let (before, after) = trace.acts.split_at_mut(l + 1);
            let prev = &before[l];
            let pre = &mut trace.pre[l];
            pre.clear();
            for (row, b) in weights.chunks_exact(fan_in).zip(bias) {
                pre.push(b + dot(row, prev));
            }
            let out = &mut after[0];
            out.clear();
            if l + 1 < n_layers {
                out.extend(pre.iter().map(|&z| self.activation.apply(z)));
            } else {
                out.extend_from_slice(pre);
            }
        }
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
    pub(crate) fn backward(&self, trace: &Trace, out_grad: &[f64], grad: &mut [f64], scratch: &mut Vec<f64>) {
        let n_layers = self.layer_sizes.len() - 1;
        let mut delta = out_grad.to_vec();
        let mut offset = self.params.len();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            offset -= (fan_in + 1) * fan_out;
            let prev = &trace.acts[l];
            {
                let (gw, gb) = grad[offset..offset + (fan_in + 1) * fan_out].split_at_mut(fan_in * fan_out);
                for (j, &dj) in delta.iter().enumerate() {
                    if dj == 0.0 {
                        continue;
                    }
                    gb[j] += dj;
                    for (g, &a) in gw[j * fan_in..(j + 1) * fan_in].iter_mut().zip(prev) {
                        *g += dj * a;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let weights = &self.params[offset..offset + fan_in * fan_out];
            scratch.clear();
            scratch.resize(fan_in, 0.0);
            for (j, &dj) in delta.iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                for (s, &w) in scratch.iter_mut().zip(&weights[j * fan_in..(j + 1) * fan_in]) {
                    *s += dj * w;
                }
            }
            let pre = &trace.pre[l - 1];
            for ((s, &z), &a) in scratch.iter_mut().zip(pre).zip(prev) {
                *s *= self.activation.derivative(z, a);
            }
            std::mem::swap(&mut delta, scratch);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
