//! Backprop vs central finite differences for a dense MLP and a transformer
//! encoder.

use anyhow::Result;
use drl_trader::nn::{DenseNetConfig, Mode, Network, NetworkConfig, Tensor, TransformerConfig};
use drl_trader::{seeded, SeedRng};
use rand::Rng;

fn random_tensor(shape: &[usize], rng: &mut SeedRng) -> Result<Tensor> {
    let n = shape.iter().product();
    Ok(Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?)
}

// loss = ½Σy², so dL/dy = y
fn loss(out: &Tensor) -> f64 {
    0.5 * out.data().iter().map(|y| y * y).sum::<f64>()
}

fn check(name: &str, net: &mut Network, input: &Tensor, rng: &mut SeedRng) -> Result<()> {
    let out = net.forward(input, Mode::Train, rng)?;
    net.backward(&out)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let names: Vec<String> = net.params().names().cloned().collect();
    for p in &names {
        let len = net.params().get(p).unwrap().value.len();
        for _ in 0..len.min(8) {
            let i = rng.random_range(0..len);
            let analytic = net.params().get(p).unwrap().grad.data()[i];
            let orig = net.params().get(p).unwrap().value.data()[i];
            net.params_mut().get_mut(p).unwrap().value.data_mut()[i] = orig + h;
            let up = loss(&net.predict(input)?);
            net.params_mut().get_mut(p).unwrap().value.data_mut()[i] = orig - h;
            let down = loss(&net.predict(input)?);
            net.params_mut().get_mut(p).unwrap().value.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5));
        }
    }
    println!("{name:<12} {} tensors, max relative error {worst:.2e}", names.len());
    Ok(())
}

fn main() -> Result<()> {
    let mut rng = seeded(1);

    let mut dense = NetworkConfig::Dense(DenseNetConfig::new(12, &[64, 64], 3)).build(&mut rng)?;
    let x = random_tensor(&[4, 12], &mut rng)?;
    check("dense", &mut dense, &x, &mut rng)?;

    let cfg = TransformerConfig::default_for(5, 10, 3);
    let mut transformer = NetworkConfig::Transformer(cfg).build(&mut rng)?;
    let x = random_tensor(&[2, 10, 5], &mut rng)?;
    check("transformer", &mut transformer, &x, &mut rng)?;
    Ok(())
}
