use serde::{Deserialize, Serialize};

use super::linalg::{add_row, col_sum_acc, matmul, matmul_a_bt, matmul_at_b_acc};
use super::{dropout_mask, xavier, Architecture, Mode, ParameterSet, Tensor};
use crate::{Error, Result, SeedRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNetConfig {
    /// Input width, hidden widths, output width.
    pub widths: Vec<usize>,
    /// One entry per hidden layer.
    pub activations: Vec<Activation>,
    pub dropout: f64,
    pub l1: f64,
    pub l2: f64,
}

impl DenseNetConfig {
    /// Tanh hidden layers, linear output.
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);
        Self {
            widths,
            activations: vec![Activation::Tanh; hidden.len()],
            dropout: 0.0,
            l1: 0.0,
            l2: 0.0,
        }
    }

    /// Default 2×64 hidden layers.
    pub fn default_for(input: usize, output: usize) -> Self {
        Self::new(input, &[64, 64], output)
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap_or(&0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::Config(format!(
                "dense widths must list ≥ 2 positive sizes, got {:?}",
                self.widths
            )));
        }
        if self.activations.len() != self.widths.len() - 2 {
            return Err(Error::Config(format!(
                "{} hidden layers but {} activations",
                self.widths.len() - 2,
                self.activations.len()
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0,1)", self.dropout)));
        }
        if self.l1 < 0.0 || self.l2 < 0.0 {
            return Err(Error::Config("l1/l2 must be non-negative".into()));
        }
        Ok(())
    }

    fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }
}

pub(crate) fn weight_name(layer: usize) -> String {
    format!("layer{layer}.weight")
}

pub(crate) fn bias_name(layer: usize) -> String {
    format!("layer{layer}.bias")
}

#[derive(Debug, Clone)]
struct DenseCache {
    batch: usize,
    /// Input to each layer (post-dropout for hidden layers).
    inputs: Vec<Vec<f64>>,
    /// Post-activation, pre-dropout output of each hidden layer.
    activations: Vec<Vec<f64>>,
    /// Inverted-dropout multipliers per hidden layer (empty when no dropout).
    masks: Vec<Vec<f64>>,
}

/// Fully connected feed-forward network.
#[derive(Debug, Clone)]
pub struct DenseNet {
    config: DenseNetConfig,
    params: ParameterSet,
    cache: Option<DenseCache>,
}

impl DenseNet {
    /// Xavier-uniform weights, zero biases.
    pub fn new(config: DenseNetConfig, rng: &mut SeedRng) -> Result<Self> {
        config.validate()?;
        let mut params = ParameterSet::new(Architecture::Dense);
        for l in 0..config.layer_count() {
            let (fan_in, fan_out) = (config.widths[l], config.widths[l + 1]);
            params.insert(weight_name(l), xavier(&[fan_in, fan_out], fan_in, fan_out, rng), true)?;
            params.insert(bias_name(l), Tensor::zeros(&[fan_out]), false)?;
        }
        Ok(Self {
            config,
            params,
            cache: None,
        })
    }

    /// All-zero weights and biases.
    pub fn zeroed(config: DenseNetConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParameterSet::new(Architecture::Dense);
        for l in 0..config.layer_count() {
            let (fan_in, fan_out) = (config.widths[l], config.widths[l + 1]);
            params.insert(weight_name(l), Tensor::zeros(&[fan_in, fan_out]), true)?;
            params.insert(bias_name(l), Tensor::zeros(&[fan_out]), false)?;
        }
        Ok(Self {
            config,
            params,
            cache: None,
        })
    }

    pub fn config(&self) -> &DenseNetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    fn batch_of(&self, input: &Tensor) -> Result<usize> {
        let width = self.config.input_width();
        match input.shape() {
            [w] if *w == width => Ok(1),
            [b, w] if *w == width => Ok(*b),
            other => Err(Error::dim("layer0", format!("[batch, {width}]"), format!("{other:?}"))),
        }
    }

    /// Inference without recording state; dropout disabled.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        let batch = self.batch_of(input)?;
        let mut h = input.data().to_vec();
        let layers = self.config.layer_count();
        for l in 0..layers {
            h = self.affine(l, &h, batch);
            if l + 1 < layers {
                let act = self.config.activations[l];
                h.iter_mut().for_each(|v| *v = act.apply(*v));
            }
        }
        Tensor::new(vec![batch, self.config.output_width()], h)
    }

    fn affine(&self, layer: usize, h: &[f64], batch: usize) -> Vec<f64> {
        let (fan_in, fan_out) = (self.config.widths[layer], self.config.widths[layer + 1]);
        let mut z = matmul(h, self.params.value(&weight_name(layer)), batch, fan_in, fan_out);
        add_row(&mut z, self.params.value(&bias_name(layer)));
        z
    }

    /// Forward pass. Train mode applies dropout and records what backward needs.
    pub fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut SeedRng) -> Result<Tensor> {
        if mode == Mode::Eval {
            return self.predict(input);
        }
        let batch = self.batch_of(input)?;
        let layers = self.config.layer_count();
        let rate = self.config.dropout;
        let mut cache = DenseCache {
            batch,
            inputs: Vec::with_capacity(layers),
            activations: Vec::with_capacity(layers - 1),
            masks: Vec::with_capacity(layers - 1),
        };
        let mut h = input.data().to_vec();
        for l in 0..layers {
            let mut z = self.affine(l, &h, batch);
            cache.inputs.push(h);
            if l + 1 < layers {
                let act = self.config.activations[l];
                z.iter_mut().for_each(|v| *v = act.apply(*v));
                let mask = dropout_mask(z.len(), rate, rng);
                let mut dropped = z.clone();
                if !mask.is_empty() {
                    dropped.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                }
                cache.activations.push(z);
                cache.masks.push(mask);
                h = dropped;
            } else {
                h = z;
            }
        }
        self.cache = Some(cache);
        Tensor::new(vec![batch, self.config.output_width()], h)
    }

    /// Accumulate parameter gradients for `dL/d(output)` of the last train forward.
    pub fn backward(&mut self, grad_output: &Tensor) -> Result<()> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a train-mode forward".into()))?;
        let out_w = self.config.output_width();
        if grad_output.len() != cache.batch * out_w {
            return Err(Error::dim(
                "output gradient",
                format!("[{}, {out_w}]", cache.batch),
                format!("{:?}", grad_output.shape()),
            ));
        }
        let batch = cache.batch;
        let mut delta = grad_output.data().to_vec();
        for l in (0..self.config.layer_count()).rev() {
            let (fan_in, fan_out) = (self.config.widths[l], self.config.widths[l + 1]);
            matmul_at_b_acc(
                &cache.inputs[l],
                &delta,
                batch,
                fan_in,
                fan_out,
                self.params.grad_mut(&weight_name(l)),
            );
            col_sum_acc(&delta, fan_out, self.params.grad_mut(&bias_name(l)));
            if l == 0 {
                break;
            }
            let mut d_in = matmul_a_bt(&delta, self.params.value(&weight_name(l)), batch, fan_out, fan_in);
            let prev = l - 1;
            let mask = &cache.masks[prev];
            if !mask.is_empty() {
                d_in.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
            }
            let act = self.config.activations[prev];
            d_in
                .iter_mut()
                .zip(&cache.activations[prev])
                .for_each(|(d, &y)| *d *= act.derivative_from_output(y));
            delta = d_in;
        }
        Ok(())
    }
}
