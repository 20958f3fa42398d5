//! Compares backprop gradients of the desk network with central finite
//! differences on a handful of parameters per layer.
//!
//! cargo run --release --example gradient_check

use acuity::nn::{build_network, Scale};
use acuity::rng::RandomSource;
use acuity::tensor::Tensor;

fn main() -> acuity::Result<()> {
    let mut rng = RandomSource::new(1);
    let net = build_network(Scale::Desk, 5, &mut rng)?;
    let x = Tensor::from_vec(&[2, 1, 32, 32], (0..2048).map(|_| rng.normal(0.0, 1.0)).collect())?;
    let labels = [1, 4];
    let dropout_seed = 7;
    let loss = |n: &acuity::nn::NetworkState| n.loss_and_gradients(&x, &labels, &mut RandomSource::new(dropout_seed));
    let (base, grads) = loss(&net)?;
    println!("loss {base:.6}");

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (layer, tensors) in net.params().iter().enumerate() {
        for (t, tensor) in tensors.iter().enumerate() {
            for _ in 0..3 {
                let i = rng.below(tensor.len());
                let mut up = net.clone();
                up.params_mut()[layer][t].data_mut()[i] += h;
                let mut down = net.clone();
                down.params_mut()[layer][t].data_mut()[i] -= h;
                let numeric = (loss(&up)?.0 - loss(&down)?.0) / (2.0 * h);
                let analytic = grads.0[layer][t].data()[i];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
                worst = worst.max(if (analytic - numeric).abs() <= 1e-7 { 0.0 } else { rel });
                println!("layer {layer:2} tensor {t} [{i:5}]  analytic {analytic:+.6e}  numeric {numeric:+.6e}");
            }
        }
    }
    println!("worst relative error {worst:.2e}");
    Ok(())
}
