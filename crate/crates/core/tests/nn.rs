mod common;

use common::{max_gradient_error, random_tensor, GRAD_FLOOR};
use drl_trader::nn::{
    layer_norm_rows, multi_head_attention, Activation, DenseNet, DenseNetConfig, Mode, Network, NetworkConfig,
    ParameterSnapshot, Tensor, TransformerConfig, TransformerNet,
};
use drl_trader::{seeded, Error};
use proptest::prelude::*;
use rand::Rng;

fn set(net: &mut Network, name: &str, values: &[f64]) {
    let p = net.params_mut().get_mut(name).unwrap_or_else(|| panic!("no parameter {name}"));
    assert_eq!(p.value.len(), values.len(), "{name}");
    p.value.data_mut().copy_from_slice(values);
}

#[test]
fn zero_dense_net_outputs_zero() {
    let net = DenseNet::zeroed(DenseNetConfig::new(3, &[4, 4], 2)).unwrap();
    let out = net.predict(&Tensor::vector(vec![5.0, -2.0, 9.0])).unwrap();
    assert_eq!(out.data(), &[0.0, 0.0]);
}

#[test]
fn identity_dense_net() {
    let mut cfg = DenseNetConfig::new(3, &[], 3);
    cfg.activations.clear();
    let mut net = Network::Dense(DenseNet::zeroed(cfg).unwrap());
    set(&mut net, "layer0.weight", &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let out = net.predict(&Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
    assert_eq!(out.data(), &[1.0, 2.0, 3.0]);
}

#[test]
fn hand_set_two_two_one_net() {
    let mut net = Network::Dense(DenseNet::zeroed(DenseNetConfig::new(2, &[2], 1)).unwrap());
    set(&mut net, "layer0.weight", &[1.0, 2.0, 3.0, 4.0]);
    set(&mut net, "layer0.bias", &[0.5, -0.5]);
    set(&mut net, "layer1.weight", &[1.0, -1.0]);
    set(&mut net, "layer1.bias", &[0.1]);
    // z = [1·1 + 1·3 + 0.5, 1·2 + 1·4 − 0.5] = [4.5, 5.5]
    let expected = 4.5f64.tanh() - 5.5f64.tanh() + 0.1;
    let out = net.predict(&Tensor::vector(vec![1.0, 1.0])).unwrap();
    assert!((out.data()[0] - expected).abs() < 1e-15);
}

#[test]
fn dense_shape_mismatch_names_layer() {
    let net = DenseNet::zeroed(DenseNetConfig::new(3, &[4], 2)).unwrap();
    let err = net.predict(&Tensor::vector(vec![1.0, 2.0])).unwrap_err();
    match err {
        Error::Dimension { layer, .. } => assert_eq!(layer, "layer0"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn one_parameter_chain_rule() {
    let mut cfg = DenseNetConfig::new(1, &[], 1);
    cfg.activations.clear();
    let mut net = Network::Dense(DenseNet::zeroed(cfg).unwrap());
    set(&mut net, "layer0.weight", &[3.0]);
    let mut rng = seeded(0);
    let y = net.forward(&Tensor::vector(vec![2.0]), Mode::Train, &mut rng).unwrap();
    assert_eq!(y.data(), &[6.0]);
    // L = ½y², dL/dy = y
    net.backward(&y).unwrap();
    assert_eq!(net.params().get("layer0.weight").unwrap().grad.data(), &[12.0]);
}

#[test]
fn zero_loss_gradient_at_minimum() {
    let mut rng = seeded(4);
    let mut net = NetworkConfig::Dense(DenseNetConfig::new(3, &[5], 2)).build(&mut rng).unwrap();
    let x = random_tensor(&[4, 3], &mut rng);
    let y = net.forward(&x, Mode::Train, &mut rng).unwrap();
    // target == prediction → dL/dy = y − t = 0
    net.backward(&Tensor::zeros(y.shape())).unwrap();
    assert!(net.params().iter().all(|(_, p)| p.grad.data().iter().all(|g| *g == 0.0)));
}

#[test]
fn backward_without_forward_is_state_error() {
    let mut rng = seeded(1);
    let mut dense = NetworkConfig::Dense(DenseNetConfig::new(2, &[3], 1)).build(&mut rng).unwrap();
    assert!(matches!(dense.backward(&Tensor::zeros(&[1, 1])), Err(Error::State(_))));
    let mut tf = NetworkConfig::Transformer(TransformerConfig::default_for(2, 4, 1))
        .build(&mut rng)
        .unwrap();
    assert!(matches!(tf.backward(&Tensor::zeros(&[1, 1])), Err(Error::State(_))));
    // an eval forward does not arm backward either
    tf.forward(&Tensor::zeros(&[4, 2]), Mode::Eval, &mut rng).unwrap();
    assert!(matches!(tf.backward(&Tensor::zeros(&[1, 1])), Err(Error::State(_))));
}

#[test]
fn dense_gradients_match_finite_differences() {
    for seed in 0..5 {
        let mut rng = seeded(seed);
        let mut cfg = DenseNetConfig::new(6, &[8, 8], 3);
        cfg.activations = vec![Activation::Tanh, Activation::Linear];
        let mut net = NetworkConfig::Dense(cfg).build(&mut rng).unwrap();
        let x = random_tensor(&[3, 6], &mut rng);
        let err = max_gradient_error(&mut net, &x, &[0.3, -0.7, 1.1], 1000, GRAD_FLOOR, &mut rng);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn transformer_gradients_match_finite_differences() {
    for seed in 0..3 {
        let mut rng = seeded(100 + seed);
        let cfg = TransformerConfig {
            model_dim: 8,
            heads: 2,
            layers: 2,
            ff_dim: 6,
            ..TransformerConfig::default_for(3, 5, 2)
        };
        let mut net = NetworkConfig::Transformer(cfg).build(&mut rng).unwrap();
        let x = random_tensor(&[2, 5, 3], &mut rng);
        let err = max_gradient_error(&mut net, &x, &[0.5, -1.0], 1000, GRAD_FLOOR, &mut rng);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn zero_input_and_zero_head_give_zero_logits() {
    let mut rng = seeded(2);
    let mut net = NetworkConfig::Transformer(TransformerConfig::default_for(4, 6, 3))
        .build(&mut rng)
        .unwrap();
    net.params_mut().get_mut("head.weight").unwrap().value.fill(0.0);
    let out = net.predict(&Tensor::zeros(&[6, 4])).unwrap();
    assert_eq!(out.data(), &[0.0, 0.0, 0.0]);
}

#[test]
fn wrong_sequence_length_is_dimension_error() {
    let mut rng = seeded(2);
    let net = NetworkConfig::Transformer(TransformerConfig::default_for(4, 6, 3))
        .build(&mut rng)
        .unwrap();
    assert!(matches!(net.predict(&Tensor::zeros(&[5, 4])), Err(Error::Dimension { .. })));
}

#[test]
fn identical_keys_give_mean_of_values() {
    let seq = 4;
    let dim = 3;
    let mut rng = seeded(3);
    let q = random_tensor(&[seq, dim], &mut rng);
    let k = Tensor::new(vec![seq, dim], [0.2, -0.4, 0.9].repeat(seq)).unwrap();
    let v = random_tensor(&[seq, dim], &mut rng);
    let (out, probs) = multi_head_attention(q.data(), k.data(), v.data(), seq, dim, 1);
    assert!(probs.iter().all(|p| (p - 0.25).abs() < 1e-15));
    for c in 0..dim {
        let mean: f64 = (0..seq).map(|j| v.data()[j * dim + c]).sum::<f64>() / seq as f64;
        for i in 0..seq {
            assert!((out[i * dim + c] - mean).abs() < 1e-14);
        }
    }
}

#[test]
fn attention_rows_are_distributions() {
    let mut rng = seeded(9);
    let (seq, dim) = (20, 32);
    let q = random_tensor(&[seq, dim], &mut rng);
    let k = random_tensor(&[seq, dim], &mut rng);
    let v = random_tensor(&[seq, dim], &mut rng);
    let (_, probs) = multi_head_attention(q.data(), k.data(), v.data(), seq, dim, 2);
    for row in probs.chunks(seq) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn layer_norm_rows_are_standardized() {
    let mut rng = seeded(10);
    let x: Vec<f64> = (0..32 * 20).map(|_| rng.random_range(-3.0..3.0)).collect();
    let (xhat, _) = layer_norm_rows(&x, 32, 1e-9);
    for row in xhat.chunks(32) {
        let mean = row.iter().sum::<f64>() / 32.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 32.0;
        assert!(mean.abs() < 1e-10);
        assert!((var - 1.0).abs() < 1e-8);
    }
}

/// Step-by-step single-head encoder oracle, written independently of the
/// library kernels.
#[test]
fn tiny_transformer_matches_hand_computation() {
    let cfg = TransformerConfig {
        input_features: 2,
        model_dim: 2,
        heads: 1,
        layers: 1,
        ff_dim: 2,
        dropout: 0.0,
        seq_len: 3,
        output: 1,
        l1: 0.0,
        l2: 0.0,
        layer_norm_eps: 1e-9,
    };
    let mut rng = seeded(0);
    let mut net = NetworkConfig::Transformer(cfg).build(&mut rng).unwrap();
    let w_in = [[0.5, -0.2], [0.1, 0.3]];
    let b_in = [0.05, -0.05];
    let wq = [[0.2, 0.4], [-0.3, 0.1]];
    let wk = [[0.6, -0.1], [0.2, 0.5]];
    let wv = [[1.0, 0.2], [-0.4, 0.7]];
    let wo = [[0.9, -0.3], [0.2, 0.8]];
    let w1 = [[0.3, -0.6], [0.5, 0.4]];
    let w2 = [[0.7, 0.1], [-0.2, 0.9]];
    let head = [0.6, -1.1];
    let flat = |m: [[f64; 2]; 2]| vec![m[0][0], m[0][1], m[1][0], m[1][1]];
    set(&mut net, "input.weight", &flat(w_in));
    set(&mut net, "input.bias", &b_in);
    set(&mut net, "enc0.attn.q.weight", &flat(wq));
    set(&mut net, "enc0.attn.k.weight", &flat(wk));
    set(&mut net, "enc0.attn.v.weight", &flat(wv));
    set(&mut net, "enc0.attn.o.weight", &flat(wo));
    set(&mut net, "enc0.ff1.weight", &flat(w1));
    set(&mut net, "enc0.ff2.weight", &flat(w2));
    set(&mut net, "head.weight", &head);
    for bias in ["enc0.attn.q.bias", "enc0.attn.k.bias", "enc0.attn.v.bias", "enc0.attn.o.bias"] {
        set(&mut net, bias, &[0.0, 0.0]);
    }
    set(&mut net, "enc0.ff1.bias", &[0.0, 0.0]);
    set(&mut net, "enc0.ff2.bias", &[0.0, 0.0]);
    set(&mut net, "head.bias", &[0.25]);

    let x = [[1.0, 2.0], [-1.0, 0.5], [0.3, -0.7]];
    let mv = |row: [f64; 2], m: [[f64; 2]; 2]| {
        [row[0] * m[0][0] + row[1] * m[1][0], row[0] * m[0][1] + row[1] * m[1][1]]
    };
    let ln = |r: [f64; 2]| {
        let mean = (r[0] + r[1]) / 2.0;
        let var = ((r[0] - mean).powi(2) + (r[1] - mean).powi(2)) / 2.0;
        let s = (var + 1e-9).sqrt();
        [(r[0] - mean) / s, (r[1] - mean) / s]
    };
    // d = 2: PE(t) = [sin t, cos t]
    let mut h = [[0.0; 2]; 3];
    for t in 0..3 {
        let p = mv(x[t], w_in);
        h[t] = [p[0] + b_in[0] + (t as f64).sin(), p[1] + b_in[1] + (t as f64).cos()];
    }
    let q: Vec<[f64; 2]> = h.iter().map(|r| mv(*r, wq)).collect();
    let k: Vec<[f64; 2]> = h.iter().map(|r| mv(*r, wk)).collect();
    let v: Vec<[f64; 2]> = h.iter().map(|r| mv(*r, wv)).collect();
    let mut out = 0.0;
    for i in 0..3 {
        let scores: Vec<f64> = (0..3)
            .map(|j| (q[i][0] * k[j][0] + q[i][1] * k[j][1]) / 2f64.sqrt())
            .collect();
        let z: f64 = scores.iter().map(|s| s.exp()).sum();
        let w: Vec<f64> = scores.iter().map(|s| s.exp() / z).collect();
        let attn = [
            w[0] * v[0][0] + w[1] * v[1][0] + w[2] * v[2][0],
            w[0] * v[0][1] + w[1] * v[1][1] + w[2] * v[2][1],
        ];
        let a = mv(attn, wo);
        let h1 = ln([h[i][0] + a[0], h[i][1] + a[1]]);
        let hid = mv(h1, w1).map(f64::tanh);
        let f = mv(hid, w2);
        let h2 = ln([h1[0] + f[0], h1[1] + f[1]]);
        if i == 2 {
            out = h2[0] * head[0] + h2[1] * head[1] + 0.25;
        }
    }
    let input = Tensor::new(vec![3, 2], x.concat()).unwrap();
    let got = net.predict(&input).unwrap().data()[0];
    assert!((got - out).abs() < 1e-12, "{got} vs {out}");
}

#[test]
fn positional_encodings_make_order_matter() {
    let mut rng = seeded(5);
    let net = TransformerNet::new(TransformerConfig::default_for(3, 6, 2), &mut rng).unwrap();
    let x = random_tensor(&[6, 3], &mut rng);
    let mut rows: Vec<Vec<f64>> = (0..6).map(|i| x.row(i).to_vec()).collect();
    rows.swap(0, 4);
    let permuted = Tensor::from_rows(&rows).unwrap();
    let a = net.predict(&x).unwrap();
    let b = net.predict(&permuted).unwrap();
    assert_ne!(a.data(), b.data());
}

#[test]
fn eval_forward_is_bit_identical() {
    let mut rng = seeded(6);
    let mut cfg = TransformerConfig::default_for(3, 6, 2);
    cfg.dropout = 0.3;
    let mut net = NetworkConfig::Transformer(cfg).build(&mut rng).unwrap();
    let x = random_tensor(&[2, 6, 3], &mut rng);
    let a = net.forward(&x, Mode::Eval, &mut rng).unwrap();
    let b = net.forward(&x, Mode::Eval, &mut seeded(999)).unwrap();
    assert_eq!(a, b);
    let train = net.forward(&x, Mode::Train, &mut rng).unwrap();
    assert_ne!(a, train);
}

#[test]
fn dropout_rate_and_scaling() {
    let mut rng = seeded(11);
    let rate = 0.3;
    let mask = drl_trader::nn::dropout_mask(100_000, rate, &mut rng);
    let dropped = mask.iter().filter(|m| **m == 0.0).count() as f64 / mask.len() as f64;
    assert!((dropped - rate).abs() < 0.01 * rate, "{dropped}");
    assert!(mask.iter().all(|m| *m == 0.0 || (*m - 1.0 / 0.7).abs() < 1e-15));
}

#[test]
fn dense_dropout_backward_reuses_mask() {
    let mut rng = seeded(12);
    let mut cfg = DenseNetConfig::new(4, &[16], 2);
    cfg.dropout = 0.5;
    let mut net = NetworkConfig::Dense(cfg).build(&mut rng).unwrap();
    let x = random_tensor(&[1, 4], &mut rng);
    // with a fixed mask the network is linear in the head weights, so the
    // head-weight gradient is exactly the masked hidden activation
    net.forward(&x, Mode::Train, &mut rng).unwrap();
    net.backward(&Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap()).unwrap();
    let grad = net.params().get("layer1.weight").unwrap().grad.data().to_vec();
    let zeros = grad.chunks(2).filter(|r| r[0] == 0.0).count();
    assert!(zeros > 0 && zeros < 16, "{zeros}");
}

#[test]
fn snapshot_restores_network() {
    let mut rng = seeded(13);
    let a = NetworkConfig::Transformer(TransformerConfig::default_for(3, 4, 3))
        .build(&mut rng)
        .unwrap();
    let mut b = NetworkConfig::Transformer(TransformerConfig::default_for(3, 4, 3))
        .build(&mut rng)
        .unwrap();
    let snap = ParameterSnapshot::from_json(&a.params().snapshot().to_json().unwrap()).unwrap();
    b.params_mut().load_snapshot(&snap).unwrap();
    let x = random_tensor(&[4, 3], &mut rng);
    assert_eq!(a.predict(&x).unwrap(), b.predict(&x).unwrap());
}

proptest! {
    #[test]
    fn snapshot_json_round_trips_bits(values in proptest::collection::vec(
        any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..64)) {
        let mut set = drl_trader::nn::ParameterSet::new(drl_trader::nn::Architecture::Dense);
        set.insert("w", Tensor::vector(values.clone()), true).unwrap();
        let back = ParameterSnapshot::from_json(&set.snapshot().to_json().unwrap()).unwrap();
        let got = back.tensors["w"].data();
        for (a, b) in values.iter().zip(got) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
