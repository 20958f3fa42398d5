//! Finite-difference checks of every layer's backward pass and of the
//! composed desk network. Each returns the number of probed coordinates.

use acuity::nn::layers::{
    conv_backward, conv_forward_linear, dense_backward, dense_forward_cached, lrn_backward, lrn_forward,
    maxpool_backward, maxpool_forward, Mode,
};
use acuity::nn::{
    build_network, softmax_cross_entropy, Activation, ConvSpec, LrnSpec, PoolSpec, Scale,
};
use acuity::rng::RandomSource;

use super::{central_difference, check_gradient, fd_close, probe_indices, random_tensor, weighted_sum};

type Check = Result<usize, String>;

pub fn conv(seed: u64) -> Check {
    let mut rng = RandomSource::new(seed);
    let mut total = 0;
    for spec in [
        ConvSpec { out_channels: 3, kernel_h: 3, kernel_w: 3, stride: 1, pad: 1 },
        ConvSpec { out_channels: 2, kernel_h: 4, kernel_w: 3, stride: 2, pad: 2 },
    ] {
        let mut x = random_tensor(&[2, 2, 6, 7], &mut rng);
        let mut w = random_tensor(&[spec.out_channels, 2, spec.kernel_h, spec.kernel_w], &mut rng);
        let mut b = random_tensor(&[spec.out_channels], &mut rng);
        let out = conv_forward_linear(&x, &spec, &w, &b).map_err(|e| e.to_string())?;
        let r = random_tensor(out.shape(), &mut rng);
        let g = conv_backward(&x, &spec, &w, &r).map_err(|e| e.to_string())?;
        let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
        total += check_gradient(&mut x, &g.d_input, 40, &mut rng, |xv| {
            weighted_sum(&conv_forward_linear(xv, &spec, &w0, &b0).unwrap(), &r)
        })?;
        total += check_gradient(&mut w, &g.d_weights, 40, &mut rng, |wv| {
            weighted_sum(&conv_forward_linear(&x0, &spec, wv, &b0).unwrap(), &r)
        })?;
        total += check_gradient(&mut b, &g.d_bias, 40, &mut rng, |bv| {
            weighted_sum(&conv_forward_linear(&x0, &spec, &w0, bv).unwrap(), &r)
        })?;
    }
    Ok(total)
}

pub fn maxpool(seed: u64) -> Check {
    let mut rng = RandomSource::new(seed);
    let spec = PoolSpec { window: 3, stride: 2 };
    let mut x = random_tensor(&[2, 3, 7, 7], &mut rng);
    let (out, idx) = maxpool_forward(&x, &spec).map_err(|e| e.to_string())?;
    let r = random_tensor(out.shape(), &mut rng);
    let g = maxpool_backward(x.shape(), &idx, &r).map_err(|e| e.to_string())?;
    check_gradient(&mut x, &g, 80, &mut rng, |xv| weighted_sum(&maxpool_forward(xv, &spec).unwrap().0, &r))
}

pub fn lrn(seed: u64) -> Check {
    let mut rng = RandomSource::new(seed);
    let mut total = 0;
    // the default constants are nearly linear; the second spec exercises the
    // cross-channel term
    for spec in [LrnSpec::default(), LrnSpec { size: 3, k: 1.0, alpha: 0.5, beta: 0.75 }] {
        let mut x = random_tensor(&[2, 6, 3, 3], &mut rng);
        let (out, denom) = lrn_forward(&x, &spec).map_err(|e| e.to_string())?;
        let r = random_tensor(out.shape(), &mut rng);
        let g = lrn_backward(&x, &denom, &spec, &r).map_err(|e| e.to_string())?;
        total += check_gradient(&mut x, &g, 60, &mut rng, |xv| weighted_sum(&lrn_forward(xv, &spec).unwrap().0, &r))?;
    }
    Ok(total)
}

/// Tanh dense layer with dropout; the mask is held fixed by reseeding.
pub fn dense_tanh(seed: u64) -> Check {
    let mut rng = RandomSource::new(seed);
    let mut x = random_tensor(&[4, 6], &mut rng);
    let mut w = random_tensor(&[6, 5], &mut rng);
    let mut b = random_tensor(&[5], &mut rng);
    let r = random_tensor(&[4, 5], &mut rng);
    let mask_seed = seed ^ 0xD0;
    let fwd = |x: &acuity::tensor::Tensor, w: &acuity::tensor::Tensor, b: &acuity::tensor::Tensor| {
        dense_forward_cached(x, w, b, Activation::Tanh, 0.3, Mode::Train, &mut RandomSource::new(mask_seed)).unwrap()
    };
    let cache = fwd(&x, &w, &b);
    let g = dense_backward(&x, &w, &cache, Activation::Tanh, &r).map_err(|e| e.to_string())?;
    let (x0, w0, b0) = (x.clone(), w.clone(), b.clone());
    let mut total = check_gradient(&mut x, &g.d_input, 40, &mut rng, |xv| weighted_sum(&fwd(xv, &w0, &b0).out, &r))?;
    total += check_gradient(&mut w, &g.d_weights, 40, &mut rng, |wv| weighted_sum(&fwd(&x0, wv, &b0).out, &r))?;
    total += check_gradient(&mut b, &g.d_bias, 40, &mut rng, |bv| weighted_sum(&fwd(&x0, &w0, bv).out, &r))?;
    Ok(total)
}

pub fn softmax_ce(seed: u64) -> Check {
    let mut rng = RandomSource::new(seed);
    let mut logits = random_tensor(&[5, 4], &mut rng);
    let labels: Vec<usize> = (0..5).map(|_| rng.below(4)).collect();
    let (_, g) = softmax_cross_entropy(&logits, &labels).map_err(|e| e.to_string())?;
    check_gradient(&mut logits, &g, 20, &mut rng, |l| softmax_cross_entropy(l, &labels).unwrap().0)
}

/// Full desk network (conv/pool/LRN stack, tanh dense with dropout, softmax
/// head) against central differences of the mean cross-entropy.
pub fn desk_network(seed: u64) -> Check {
    let mut rng = RandomSource::new(seed);
    let net = build_network(Scale::Desk, 5, &mut rng).map_err(|e| e.to_string())?;
    let x = random_tensor(&[3, 1, 32, 32], &mut rng);
    let labels = vec![0, 3, 4];
    let dropout_seed = seed.wrapping_add(99);
    let (_, grads) = net
        .loss_and_gradients(&x, &labels, &mut RandomSource::new(dropout_seed))
        .map_err(|e| e.to_string())?;
    let mut total = 0;
    for layer in 0..net.params().len() {
        for t in 0..net.params()[layer].len() {
            let len = net.params()[layer][t].len();
            for i in probe_indices(len, 6, &mut rng) {
                let mut probe = net.params()[layer][t].clone();
                let num = central_difference(&mut probe, i, |p| {
                    let mut n2 = net.clone();
                    n2.params_mut()[layer][t] = p.clone();
                    n2.loss_and_gradients(&x, &labels, &mut RandomSource::new(dropout_seed)).unwrap().0
                });
                let ana = grads.0[layer][t].data()[i];
                if !fd_close(ana, num) {
                    return Err(format!("layer {layer} tensor {t} coord {i}: analytic {ana:e} vs numeric {num:e}"));
                }
                total += 1;
            }
        }
    }
    Ok(total)
}
