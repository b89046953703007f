//! Encoder-only transformer: input projection with sinusoidal positional
//! encodings, post-norm encoder layers (multi-head self-attention and a tanh
//! feed-forward block, each wrapped in a residual connection followed by
//! layer normalisation), and a linear head reading the final time step.

use serde::{Deserialize, Serialize};

use super::linalg::{add_row, col_sum_acc, matmul, matmul_a_bt, matmul_at_b_acc, softmax_in_place};
use super::{dropout_mask, xavier, Architecture, Mode, ParameterSet, Tensor};
use crate::{Error, Result, SeedRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    /// Features per time step before projection.
    pub input_features: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub ff_dim: usize,
    pub dropout: f64,
    pub seq_len: usize,
    pub output: usize,
    #[serde(default)]
    pub l1: f64,
    #[serde(default)]
    pub l2: f64,
    #[serde(default = "default_ln_eps")]
    pub layer_norm_eps: f64,
}

fn default_ln_eps() -> f64 {
    1e-9
}

impl TransformerConfig {
    /// d=32, h=2, L=2, ff=64.
    pub fn default_for(input_features: usize, seq_len: usize, output: usize) -> Self {
        Self {
            input_features,
            model_dim: 32,
            heads: 2,
            layers: 2,
            ff_dim: 64,
            dropout: 0.0,
            seq_len,
            output,
            l1: 0.0,
            l2: 0.0,
            layer_norm_eps: default_ln_eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.input_features,
            self.model_dim,
            self.heads,
            self.layers,
            self.ff_dim,
            self.seq_len,
            self.output,
        ];
        if positive.contains(&0) {
            return Err(Error::Config(format!("transformer sizes must be positive: {self:?}")));
        }
        if !self.model_dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "model_dim {} not divisible by heads {}",
                self.model_dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0,1)", self.dropout)));
        }
        if self.l1 < 0.0 || self.l2 < 0.0 || self.layer_norm_eps <= 0.0 {
            return Err(Error::Config("l1/l2 must be ≥ 0 and layer_norm_eps > 0".into()));
        }
        Ok(())
    }
}

/// Sinusoidal positional encoding table, `seq_len × dim`.
pub fn positional_encoding(seq_len: usize, dim: usize) -> Vec<f64> {
    let mut pe = vec![0.0; seq_len * dim];
    for t in 0..seq_len {
        for i in 0..dim {
            let pair = (i / 2) as f64;
            let angle = t as f64 / 10000f64.powf(2.0 * pair / dim as f64);
            pe[t * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

/// Scaled dot-product attention over `heads` column slices of `q`, `k`, `v`
/// (each `seq × dim`). Returns the concatenated head outputs (`seq × dim`) and
/// the attention probabilities (`heads × seq × seq`).
pub fn multi_head_attention(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    seq: usize,
    dim: usize,
    heads: usize,
) -> (Vec<f64>, Vec<f64>) {
    let dk = dim / heads;
    let scale = 1.0 / (dk as f64).sqrt();
    let mut out = vec![0.0; seq * dim];
    let mut probs = vec![0.0; heads * seq * seq];
    for h in 0..heads {
        let off = h * dk;
        for i in 0..seq {
            let row = &mut probs[(h * seq + i) * seq..(h * seq + i + 1) * seq];
            let qi = &q[i * dim + off..i * dim + off + dk];
            for (j, s) in row.iter_mut().enumerate() {
                let kj = &k[j * dim + off..j * dim + off + dk];
                *s = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
            }
            softmax_in_place(row);
            let oi = &mut out[i * dim + off..i * dim + off + dk];
            for (j, &p) in row.iter().enumerate() {
                let vj = &v[j * dim + off..j * dim + off + dk];
                for (o, &x) in oi.iter_mut().zip(vj) {
                    *o += p * x;
                }
            }
        }
    }
    (out, probs)
}

/// Row-wise normalisation to zero mean and unit (population) variance.
/// Returns the normalised rows and each row's `1/sqrt(var + eps)`.
pub fn layer_norm_rows(x: &[f64], dim: usize, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let rows = x.len() / dim;
    let mut xhat = vec![0.0; x.len()];
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * dim..(r + 1) * dim];
        let mean = row.iter().sum::<f64>() / dim as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / dim as f64;
        let is = 1.0 / (var + eps).sqrt();
        inv_std[r] = is;
        for (o, v) in xhat[r * dim..(r + 1) * dim].iter_mut().zip(row) {
            *o = (v - mean) * is;
        }
    }
    (xhat, inv_std)
}

fn layer_norm_backward(dxhat: &[f64], xhat: &[f64], inv_std: &[f64], dim: usize) -> Vec<f64> {
    let mut dx = vec![0.0; dxhat.len()];
    let n = dim as f64;
    for (r, &is) in inv_std.iter().enumerate() {
        let g = &dxhat[r * dim..(r + 1) * dim];
        let xh = &xhat[r * dim..(r + 1) * dim];
        let sum_g: f64 = g.iter().sum();
        let sum_gx: f64 = g.iter().zip(xh).map(|(a, b)| a * b).sum();
        for ((o, &gi), &xi) in dx[r * dim..(r + 1) * dim].iter_mut().zip(g).zip(xh) {
            *o = is / n * (n * gi - sum_g - xi * sum_gx);
        }
    }
    dx
}

fn p(layer: usize, name: &str) -> String {
    format!("enc{layer}.{name}")
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<f64>,
    attn: Vec<f64>,
    mask1: Vec<f64>,
    xhat1: Vec<f64>,
    inv_std1: Vec<f64>,
    h1: Vec<f64>,
    hidden: Vec<f64>,
    mask2: Vec<f64>,
    xhat2: Vec<f64>,
    inv_std2: Vec<f64>,
}

#[derive(Debug, Clone)]
struct SampleCache {
    input: Vec<f64>,
    layers: Vec<LayerCache>,
    pooled: Vec<f64>,
}

/// Transformer encoder mapping a `seq_len × input_features` window to an
/// output vector.
#[derive(Debug, Clone)]
pub struct TransformerNet {
    config: TransformerConfig,
    params: ParameterSet,
    pos_enc: Vec<f64>,
    cache: Option<Vec<SampleCache>>,
}

impl TransformerNet {
    pub fn new(config: TransformerConfig, rng: &mut SeedRng) -> Result<Self> {
        config.validate()?;
        let (f, d, ff, out) = (config.input_features, config.model_dim, config.ff_dim, config.output);
        let mut params = ParameterSet::new(Architecture::Transformer);
        params.insert("input.weight", xavier(&[f, d], f, d, rng), true)?;
        params.insert("input.bias", Tensor::zeros(&[d]), false)?;
        for l in 0..config.layers {
            for proj in ["q", "k", "v", "o"] {
                params.insert(p(l, &format!("attn.{proj}.weight")), xavier(&[d, d], d, d, rng), true)?;
                params.insert(p(l, &format!("attn.{proj}.bias")), Tensor::zeros(&[d]), false)?;
            }
            params.insert(p(l, "norm1.gamma"), Tensor::filled(&[d], 1.0), false)?;
            params.insert(p(l, "norm1.beta"), Tensor::zeros(&[d]), false)?;
            params.insert(p(l, "ff1.weight"), xavier(&[d, ff], d, ff, rng), true)?;
            params.insert(p(l, "ff1.bias"), Tensor::zeros(&[ff]), false)?;
            params.insert(p(l, "ff2.weight"), xavier(&[ff, d], ff, d, rng), true)?;
            params.insert(p(l, "ff2.bias"), Tensor::zeros(&[d]), false)?;
            params.insert(p(l, "norm2.gamma"), Tensor::filled(&[d], 1.0), false)?;
            params.insert(p(l, "norm2.beta"), Tensor::zeros(&[d]), false)?;
        }
        params.insert("head.weight", xavier(&[d, out], d, out, rng), true)?;
        params.insert("head.bias", Tensor::zeros(&[out]), false)?;
        let pos_enc = positional_encoding(config.seq_len, d);
        Ok(Self {
            config,
            params,
            pos_enc,
            cache: None,
        })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    fn batch_of(&self, input: &Tensor) -> Result<usize> {
        let (t, f) = (self.config.seq_len, self.config.input_features);
        match input.shape() {
            [st, sf] if *st == t && *sf == f => Ok(1),
            [b, st, sf] if *st == t && *sf == f => Ok(*b),
            other => Err(Error::dim(
                "input projection",
                format!("[batch, {t}, {f}]"),
                format!("{other:?}"),
            )),
        }
    }

    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        let batch = self.batch_of(input)?;
        let stride = self.config.seq_len * self.config.input_features;
        let mut out = Vec::with_capacity(batch * self.config.output);
        for x in input.data().chunks(stride) {
            let (y, _) = self.forward_sample(x, None);
            out.extend(y);
        }
        Tensor::new(vec![batch, self.config.output], out)
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut SeedRng) -> Result<Tensor> {
        if mode == Mode::Eval {
            return self.predict(input);
        }
        let batch = self.batch_of(input)?;
        let stride = self.config.seq_len * self.config.input_features;
        let mut out = Vec::with_capacity(batch * self.config.output);
        let mut caches = Vec::with_capacity(batch);
        for x in input.data().chunks(stride) {
            let (y, cache) = self.forward_sample(x, Some(rng));
            out.extend(y);
            caches.push(cache.expect("train forward records a cache"));
        }
        self.cache = Some(caches);
        Tensor::new(vec![batch, self.config.output], out)
    }

    fn forward_sample(&self, x: &[f64], mut rng: Option<&mut SeedRng>) -> (Vec<f64>, Option<SampleCache>) {
        let cfg = &self.config;
        let (t, f, d, ff) = (cfg.seq_len, cfg.input_features, cfg.model_dim, cfg.ff_dim);
        let rate = if rng.is_some() { cfg.dropout } else { 0.0 };
        let record = rng.is_some();
        let pv = |name: &str| self.params.value(name);

        let mut h = matmul(x, pv("input.weight"), t, f, d);
        add_row(&mut h, pv("input.bias"));
        h.iter_mut().zip(&self.pos_enc).for_each(|(a, b)| *a += b);

        let mut layer_caches = Vec::new();
        for l in 0..cfg.layers {
            let proj = |name: &str, src: &[f64]| {
                let mut y = matmul(src, pv(&p(l, &format!("attn.{name}.weight"))), t, d, d);
                add_row(&mut y, pv(&p(l, &format!("attn.{name}.bias"))));
                y
            };
            let q = proj("q", &h);
            let k = proj("k", &h);
            let v = proj("v", &h);
            let (attn, probs) = multi_head_attention(&q, &k, &v, t, d, cfg.heads);
            let mut a = matmul(&attn, pv(&p(l, "attn.o.weight")), t, d, d);
            add_row(&mut a, pv(&p(l, "attn.o.bias")));
            let mask1 = match rng.as_deref_mut() {
                Some(r) => dropout_mask(a.len(), rate, r),
                None => Vec::new(),
            };
            if !mask1.is_empty() {
                a.iter_mut().zip(&mask1).for_each(|(x, m)| *x *= m);
            }
            let res1: Vec<f64> = h.iter().zip(&a).map(|(x, y)| x + y).collect();
            let (xhat1, inv_std1) = layer_norm_rows(&res1, d, cfg.layer_norm_eps);
            let h1 = affine_norm(&xhat1, pv(&p(l, "norm1.gamma")), pv(&p(l, "norm1.beta")));

            let mut hidden = matmul(&h1, pv(&p(l, "ff1.weight")), t, d, ff);
            add_row(&mut hidden, pv(&p(l, "ff1.bias")));
            hidden.iter_mut().for_each(|z| *z = z.tanh());
            let mut fo = matmul(&hidden, pv(&p(l, "ff2.weight")), t, ff, d);
            add_row(&mut fo, pv(&p(l, "ff2.bias")));
            let mask2 = match rng.as_deref_mut() {
                Some(r) => dropout_mask(fo.len(), rate, r),
                None => Vec::new(),
            };
            if !mask2.is_empty() {
                fo.iter_mut().zip(&mask2).for_each(|(x, m)| *x *= m);
            }
            let res2: Vec<f64> = h1.iter().zip(&fo).map(|(x, y)| x + y).collect();
            let (xhat2, inv_std2) = layer_norm_rows(&res2, d, cfg.layer_norm_eps);
            let h2 = affine_norm(&xhat2, pv(&p(l, "norm2.gamma")), pv(&p(l, "norm2.beta")));
            if record {
                layer_caches.push(LayerCache {
                    input: h,
                    q,
                    k,
                    v,
                    probs,
                    attn,
                    mask1,
                    xhat1,
                    inv_std1,
                    h1,
                    hidden,
                    mask2,
                    xhat2,
                    inv_std2,
                });
            }
            h = h2;
        }

        let pooled = h[(t - 1) * d..t * d].to_vec();
        let mut y = matmul(&pooled, pv("head.weight"), 1, d, cfg.output);
        add_row(&mut y, pv("head.bias"));
        let cache = record.then(|| SampleCache {
            input: x.to_vec(),
            layers: layer_caches,
            pooled,
        });
        (y, cache)
    }

    pub fn backward(&mut self, grad_output: &Tensor) -> Result<()> {
        let caches = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a train-mode forward".into()))?;
        let out = self.config.output;
        if grad_output.len() != caches.len() * out {
            return Err(Error::dim(
                "output gradient",
                format!("[{}, {out}]", caches.len()),
                format!("{:?}", grad_output.shape()),
            ));
        }
        for (cache, dy) in caches.iter().zip(grad_output.data().chunks(out)) {
            self.backward_sample(cache, dy);
        }
        Ok(())
    }

    fn backward_sample(&mut self, cache: &SampleCache, dy: &[f64]) {
        let cfg = self.config.clone();
        let (t, f, d, ff, out) = (cfg.seq_len, cfg.input_features, cfg.model_dim, cfg.ff_dim, cfg.output);
        let params = &mut self.params;

        matmul_at_b_acc(&cache.pooled, dy, 1, d, out, params.grad_mut("head.weight"));
        col_sum_acc(dy, out, params.grad_mut("head.bias"));
        let mut dh = vec![0.0; t * d];
        let d_pooled = matmul_a_bt(dy, params.value("head.weight"), 1, out, d);
        dh[(t - 1) * d..].copy_from_slice(&d_pooled);

        for l in (0..cfg.layers).rev() {
            let c = &cache.layers[l];
            // second sub-block: norm2(h1 + ff(h1))
            let dres2 = norm_backward(params, l, "norm2", &dh, &c.xhat2, &c.inv_std2, d);
            let mut dfo = dres2.clone();
            if !c.mask2.is_empty() {
                dfo.iter_mut().zip(&c.mask2).for_each(|(g, m)| *g *= m);
            }
            matmul_at_b_acc(&c.hidden, &dfo, t, ff, d, params.grad_mut(&p(l, "ff2.weight")));
            col_sum_acc(&dfo, d, params.grad_mut(&p(l, "ff2.bias")));
            let mut dz = matmul_a_bt(&dfo, params.value(&p(l, "ff2.weight")), t, d, ff);
            dz.iter_mut().zip(&c.hidden).for_each(|(g, u)| *g *= 1.0 - u * u);
            matmul_at_b_acc(&c.h1, &dz, t, d, ff, params.grad_mut(&p(l, "ff1.weight")));
            col_sum_acc(&dz, ff, params.grad_mut(&p(l, "ff1.bias")));
            let mut dh1 = matmul_a_bt(&dz, params.value(&p(l, "ff1.weight")), t, ff, d);
            dh1.iter_mut().zip(&dres2).for_each(|(a, b)| *a += b);

            // first sub-block: norm1(h + attn(h))
            let dres1 = norm_backward(params, l, "norm1", &dh1, &c.xhat1, &c.inv_std1, d);
            let mut da = dres1.clone();
            if !c.mask1.is_empty() {
                da.iter_mut().zip(&c.mask1).for_each(|(g, m)| *g *= m);
            }
            matmul_at_b_acc(&c.attn, &da, t, d, d, params.grad_mut(&p(l, "attn.o.weight")));
            col_sum_acc(&da, d, params.grad_mut(&p(l, "attn.o.bias")));
            let dattn = matmul_a_bt(&da, params.value(&p(l, "attn.o.weight")), t, d, d);
            let (dq, dk, dv) = attention_backward(&dattn, &c.q, &c.k, &c.v, &c.probs, t, d, cfg.heads);

            let mut dinput = dres1;
            for (name, grad) in [("q", &dq), ("k", &dk), ("v", &dv)] {
                let w = p(l, &format!("attn.{name}.weight"));
                matmul_at_b_acc(&c.input, grad, t, d, d, params.grad_mut(&w));
                col_sum_acc(grad, d, params.grad_mut(&p(l, &format!("attn.{name}.bias"))));
                let back = matmul_a_bt(grad, params.value(&w), t, d, d);
                dinput.iter_mut().zip(&back).for_each(|(a, b)| *a += b);
            }
            dh = dinput;
        }

        matmul_at_b_acc(&cache.input, &dh, t, f, d, params.grad_mut("input.weight"));
        col_sum_acc(&dh, d, params.grad_mut("input.bias"));
    }
}

fn affine_norm(xhat: &[f64], gamma: &[f64], beta: &[f64]) -> Vec<f64> {
    let d = gamma.len();
    let mut y = xhat.to_vec();
    for row in y.chunks_mut(d) {
        for ((v, g), b) in row.iter_mut().zip(gamma).zip(beta) {
            *v = *v * g + b;
        }
    }
    y
}

/// Gradient through `gamma ⊙ xhat + beta` and the normalisation; returns
/// the gradient w.r.t. the pre-norm input.
fn norm_backward(
    params: &mut ParameterSet,
    layer: usize,
    norm: &str,
    dy: &[f64],
    xhat: &[f64],
    inv_std: &[f64],
    d: usize,
) -> Vec<f64> {
    let gname = p(layer, &format!("{norm}.gamma"));
    {
        let dgamma = params.grad_mut(&gname);
        for (row_g, row_x) in dy.chunks(d).zip(xhat.chunks(d)) {
            for ((o, g), x) in dgamma.iter_mut().zip(row_g).zip(row_x) {
                *o += g * x;
            }
        }
    }
    col_sum_acc(dy, d, params.grad_mut(&p(layer, &format!("{norm}.beta"))));
    let gamma = params.value(&gname);
    let dxhat: Vec<f64> = dy
        .chunks(d)
        .flat_map(|row| row.iter().zip(gamma).map(|(g, s)| g * s))
        .collect();
    layer_norm_backward(&dxhat, xhat, inv_std, d)
}

#[allow(clippy::too_many_arguments)]
fn attention_backward(
    dout: &[f64],
    q: &[f64],
    k: &[f64],
    v: &[f64],
    probs: &[f64],
    seq: usize,
    dim: usize,
    heads: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dk = dim / heads;
    let scale = 1.0 / (dk as f64).sqrt();
    let mut dq = vec![0.0; seq * dim];
    let mut dkm = vec![0.0; seq * dim];
    let mut dv = vec![0.0; seq * dim];
    let mut ds = vec![0.0; seq];
    for h in 0..heads {
        let off = h * dk;
        for i in 0..seq {
            let prow = &probs[(h * seq + i) * seq..(h * seq + i + 1) * seq];
            let doi = &dout[i * dim + off..i * dim + off + dk];
            // dP_ij = dO_i · V_j ; dV_j += P_ij dO_i
            let mut dot_sum = 0.0;
            for j in 0..seq {
                let vj = &v[j * dim + off..j * dim + off + dk];
                let dp: f64 = doi.iter().zip(vj).map(|(a, b)| a * b).sum();
                ds[j] = dp;
                dot_sum += dp * prow[j];
                let pij = prow[j];
                for (o, &g) in dv[j * dim + off..j * dim + off + dk].iter_mut().zip(doi) {
                    *o += pij * g;
                }
            }
            for j in 0..seq {
                let s = prow[j] * (ds[j] - dot_sum) * scale;
                if s == 0.0 {
                    continue;
                }
                for c in 0..dk {
                    dq[i * dim + off + c] += s * k[j * dim + off + c];
                    dkm[j * dim + off + c] += s * q[i * dim + off + c];
                }
            }
        }
    }
    (dq, dkm, dv)
}
