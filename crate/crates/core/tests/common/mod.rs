//! Brute-force reference implementations and finite-difference helpers
//! shared by the integration tests. Written directly from the definitions,
//! with no reuse of library internals.

#![allow(dead_code)]

pub mod cases;
pub mod gradcheck;

use acuity::image::GrayImage;
use acuity::nn::{ConvSpec, LrnSpec, PoolSpec};
use acuity::rng::RandomSource;
use acuity::tensor::Tensor;

/// Cross-correlation with zero padding plus bias, no activation.
pub fn naive_conv(input: &Tensor, w: &Tensor, b: &Tensor, spec: &ConvSpec) -> Vec<f64> {
    let [n, c, h, wd] = [input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]];
    let (kh, kw, s, p) = (spec.kernel_h, spec.kernel_w, spec.stride, spec.pad as isize);
    let ho = (h + 2 * spec.pad - kh) / s + 1;
    let wo = (wd + 2 * spec.pad - kw) / s + 1;
    let x = input.data();
    let mut out = Vec::new();
    for i in 0..n {
        for f in 0..spec.out_channels {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = b.data()[f];
                    for ch in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let y = (oy * s + ky) as isize - p;
                                let xx = (ox * s + kx) as isize - p;
                                if y < 0 || xx < 0 || y >= h as isize || xx >= wd as isize {
                                    continue;
                                }
                                let v = x[((i * c + ch) * h + y as usize) * wd + xx as usize];
                                acc += v * w.data()[((f * c + ch) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}

pub fn naive_maxpool(input: &Tensor, spec: &PoolSpec) -> Vec<f64> {
    let [n, c, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]];
    let ho = (h - spec.window) / spec.stride + 1;
    let wo = (w - spec.window) / spec.stride + 1;
    let mut out = Vec::new();
    for plane in 0..n * c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut m = f64::NEG_INFINITY;
                for ky in 0..spec.window {
                    for kx in 0..spec.window {
                        m = m.max(input.data()[plane * h * w + (oy * spec.stride + ky) * w + ox * spec.stride + kx]);
                    }
                }
                out.push(m);
            }
        }
    }
    out
}

pub fn naive_lrn(input: &Tensor, spec: &LrnSpec) -> Vec<f64> {
    let [n, c, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]];
    let half = (spec.size / 2) as isize;
    let at = |i: usize, ch: usize, y: usize, x: usize| input.data()[((i * c + ch) * h + y) * w + x];
    let mut out = Vec::new();
    for i in 0..n {
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let mut sum = 0.0;
                    for cc in (ch as isize - half)..=(ch as isize + half) {
                        if cc >= 0 && (cc as usize) < c {
                            sum += at(i, cc as usize, y, x).powi(2);
                        }
                    }
                    out.push(at(i, ch, y, x) / (spec.k + spec.alpha * sum).powf(spec.beta));
                }
            }
        }
    }
    out
}

/// Direct 2-D Gaussian blur with edge replication, kernel built from the
/// unnormalized density and normalized over the full 2-D support.
pub fn naive_blur(img: &GrayImage, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return img.pixels().to_vec();
    }
    let r = (3.0 * sigma).ceil() as isize;
    let mut k2 = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            k2.push((-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = k2.iter().sum();
    let (h, w) = (img.height() as isize, img.width() as isize);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            let mut i = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let yy = (y + dy).clamp(0, h - 1) as usize;
                    let xx = (x + dx).clamp(0, w - 1) as usize;
                    acc += k2[i] * img.get(yy, xx);
                    i += 1;
                }
            }
            out.push(acc / total);
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn random_tensor(shape: &[usize], rng: &mut RandomSource) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap()
}

pub fn random_image(h: usize, w: usize, rng: &mut RandomSource) -> GrayImage {
    GrayImage::new(h, w, (0..h * w).map(|_| rng.uniform()).collect()).unwrap()
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL: f64 = 1e-4;
pub const FD_ABS: f64 = 1e-7;

/// `|a - n| <= 1e-7` or `|a - n| / max(|a|, |n|) <= 1e-4`.
pub fn fd_close(analytic: f64, numeric: f64) -> bool {
    let err = (analytic - numeric).abs();
    err <= FD_ABS || err / analytic.abs().max(numeric.abs()) <= FD_REL
}

/// Central difference of `f` at coordinate `i` of `x`.
pub fn central_difference(x: &mut Tensor, i: usize, mut f: impl FnMut(&Tensor) -> f64) -> f64 {
    let orig = x.data()[i];
    x.data_mut()[i] = orig + FD_STEP;
    let up = f(x);
    x.data_mut()[i] = orig - FD_STEP;
    let down = f(x);
    x.data_mut()[i] = orig;
    (up - down) / (2.0 * FD_STEP)
}

/// Coordinates to probe: all of them when few, else a seeded sample.
pub fn probe_indices(len: usize, max: usize, rng: &mut RandomSource) -> Vec<usize> {
    if len <= max {
        (0..len).collect()
    } else {
        (0..max).map(|_| rng.below(len)).collect()
    }
}

/// Checks every probed coordinate, stopping at the first mismatch.
/// Returns the number of coordinates probed.
pub fn check_gradient(
    x: &mut Tensor,
    analytic: &Tensor,
    max_probes: usize,
    rng: &mut RandomSource,
    mut f: impl FnMut(&Tensor) -> f64,
) -> Result<usize, String> {
    let idx = probe_indices(x.len(), max_probes, rng);
    for &i in &idx {
        let num = central_difference(x, i, &mut f);
        let ana = analytic.data()[i];
        if !fd_close(ana, num) {
            return Err(format!("coordinate {i}: analytic {ana:e} vs numeric {num:e}"));
        }
    }
    Ok(idx.len())
}

/// `sum(r * t)`: a scalar loss with a random upstream gradient `r`.
pub fn weighted_sum(t: &Tensor, r: &Tensor) -> f64 {
    t.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}
