//! Numeric core: tensors, dense and transformer networks with reverse-mode
//! gradients, dropout, weight penalties, and optimizers.

mod dense;
mod linalg;
mod optim;
mod params;
mod tensor;
mod transformer;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use dense::{Activation, DenseNet, DenseNetConfig};
pub use optim::{AdamConfig, AdamState, Optimizer, OptimizerConfig};
pub use params::{regularization_penalty, Architecture, Parameter, ParameterSet, ParameterSnapshot};
pub use tensor::Tensor;
pub use transformer::{
    layer_norm_rows, multi_head_attention, positional_encoding, TransformerConfig, TransformerNet,
};


use crate::{Result, SeedRng};

/// Numerically stable softmax of a logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut p = logits.to_vec();
    linalg::softmax_in_place(&mut p);
    p
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted-dropout multipliers: 0 with probability `rate`, else `1/(1-rate)`.
/// Empty when `rate == 0`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut SeedRng) -> Vec<f64> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

fn xavier(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut SeedRng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape product matches")
}

/// Network architecture plus its sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NetworkConfig {
    Dense(DenseNetConfig),
    Transformer(TransformerConfig),
}

impl NetworkConfig {
    pub fn build(&self, rng: &mut SeedRng) -> Result<Network> {
        Ok(match self {
            NetworkConfig::Dense(c) => Network::Dense(DenseNet::new(c.clone(), rng)?),
            NetworkConfig::Transformer(c) => Network::Transformer(TransformerNet::new(c.clone(), rng)?),
        })
    }

    pub fn output_width(&self) -> usize {
        match self {
            NetworkConfig::Dense(c) => c.output_width(),
            NetworkConfig::Transformer(c) => c.output,
        }
    }

    pub fn penalties(&self) -> (f64, f64) {
        match self {
            NetworkConfig::Dense(c) => (c.l1, c.l2),
            NetworkConfig::Transformer(c) => (c.l1, c.l2),
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            NetworkConfig::Dense(_) => Architecture::Dense,
            NetworkConfig::Transformer(_) => Architecture::Transformer,
        }
    }
}

/// Network sizes without the input width, which is only known once the
/// feature set and lookback are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NetworkSpec {
    Dense {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default)]
        dropout: f64,
        #[serde(default)]
        l1: f64,
        #[serde(default)]
        l2: f64,
    },
    Transformer {
        #[serde(default = "default_model_dim")]
        model_dim: usize,
        #[serde(default = "default_heads")]
        heads: usize,
        #[serde(default = "default_layers")]
        layers: usize,
        #[serde(default = "default_ff_dim")]
        ff_dim: usize,
        #[serde(default)]
        dropout: f64,
        #[serde(default)]
        l1: f64,
        #[serde(default)]
        l2: f64,
    },
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

fn default_model_dim() -> usize {
    32
}

fn default_heads() -> usize {
    2
}

fn default_layers() -> usize {
    2
}

fn default_ff_dim() -> usize {
    64
}

impl NetworkSpec {
    /// Two tanh layers of 64.
    pub fn dense() -> Self {
        NetworkSpec::Dense {
            hidden: default_hidden(),
            dropout: 0.0,
            l1: 0.0,
            l2: 0.0,
        }
    }

    /// d=32, two heads, two layers, feed-forward 64.
    pub fn transformer() -> Self {
        NetworkSpec::Transformer {
            model_dim: default_model_dim(),
            heads: default_heads(),
            layers: default_layers(),
            ff_dim: default_ff_dim(),
            dropout: 0.0,
            l1: 0.0,
            l2: 0.0,
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            NetworkSpec::Dense { .. } => Architecture::Dense,
            NetworkSpec::Transformer { .. } => Architecture::Transformer,
        }
    }

    /// Concrete config. `input` is the full input width for dense nets and
    /// the per-step width for transformers.
    pub fn resolve(&self, input: usize, seq_len: usize, output: usize) -> NetworkConfig {
        match self {
            NetworkSpec::Dense { hidden, dropout, l1, l2 } => {
                let mut c = DenseNetConfig::new(input, hidden, output);
                c.dropout = *dropout;
                c.l1 = *l1;
                c.l2 = *l2;
                NetworkConfig::Dense(c)
            }
            NetworkSpec::Transformer { model_dim, heads, layers, ff_dim, dropout, l1, l2 } => {
                let mut c = TransformerConfig::default_for(input, seq_len, output);
                c.model_dim = *model_dim;
                c.heads = *heads;
                c.layers = *layers;
                c.ff_dim = *ff_dim;
                c.dropout = *dropout;
                c.l1 = *l1;
                c.l2 = *l2;
                NetworkConfig::Transformer(c)
            }
        }
    }
}

/// Either network kind behind one interface.
#[derive(Debug, Clone)]
pub enum Network {
    Dense(DenseNet),
    Transformer(TransformerNet),
}

impl Network {
    pub fn config(&self) -> NetworkConfig {
        match self {
            Network::Dense(n) => NetworkConfig::Dense(n.config().clone()),
            Network::Transformer(n) => NetworkConfig::Transformer(n.config().clone()),
        }
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut SeedRng) -> Result<Tensor> {
        match self {
            Network::Dense(n) => n.forward(input, mode, rng),
            Network::Transformer(n) => n.forward(input, mode, rng),
        }
    }

    /// Eval-mode forward; pure in `(weights, input)`.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        match self {
            Network::Dense(n) => n.predict(input),
            Network::Transformer(n) => n.predict(input),
        }
    }

    pub fn backward(&mut self, grad_output: &Tensor) -> Result<()> {
        match self {
            Network::Dense(n) => n.backward(grad_output),
            Network::Transformer(n) => n.backward(grad_output),
        }
    }

    pub fn params(&self) -> &ParameterSet {
        match self {
            Network::Dense(n) => n.params(),
            Network::Transformer(n) => n.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        match self {
            Network::Dense(n) => n.params_mut(),
            Network::Transformer(n) => n.params_mut(),
        }
    }

    /// Adds the configured L1/L2 penalty gradients and returns the penalty.
    pub fn apply_penalty(&mut self) -> f64 {
        let (l1, l2) = self.config().penalties();
        regularization_penalty(self.params_mut(), l1, l2)
    }
}
