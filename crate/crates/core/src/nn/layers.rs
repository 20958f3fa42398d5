//! Forward and backward passes for individual layer kinds.
//!
//! All functions take batched tensors: `[N, C, H, W]` for spatial layers and
//! `[N, D]` for dense layers.

use crate::error::{shape_err, Result};
use crate::nn::loss::softmax_rows;
use crate::nn::spec::{conv_extent, Activation, ConvSpec, LrnSpec, PoolSpec};
use crate::rng::RandomSource;
use crate::tensor::{gemm, MatRef, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

fn dims4(t: &Tensor, what: &str) -> Result<[usize; 4]> {
    match *t.shape() {
        [n, c, h, w] => Ok([n, c, h, w]),
        _ => shape_err(format!("{what} expects [N, C, H, W], got {:?}", t.shape())),
    }
}

fn dims2(t: &Tensor, what: &str) -> Result<[usize; 2]> {
    match *t.shape() {
        [n, d] => Ok([n, d]),
        _ => shape_err(format!("{what} expects [N, D], got {:?}", t.shape())),
    }
}

struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    pad: usize,
}

impl ConvGeom {
    fn new(input: [usize; 4], spec: &ConvSpec) -> Result<Self> {
        let [_, c, h, w] = input;
        Ok(Self {
            c,
            h,
            w,
            kh: spec.kernel_h,
            kw: spec.kernel_w,
            ho: conv_extent(h, spec.kernel_h, spec.stride, spec.pad)?,
            wo: conv_extent(w, spec.kernel_w, spec.stride, spec.pad)?,
            stride: spec.stride,
            pad: spec.pad,
        })
    }

    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.ho * self.wo
    }

    /// Unfolds one `[C, H, W]` sample into `[C*kh*kw, Ho*Wo]` columns.
    fn im2col(&self, sample: &[f64], cols: &mut [f64]) {
        let p = self.positions();
        for ci in 0..self.c {
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (ci * self.kh + ky) * self.kw + kx;
                    let dst = &mut cols[row * p..(row + 1) * p];
                    for oy in 0..self.ho {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        let line = &mut dst[oy * self.wo..(oy + 1) * self.wo];
                        if iy < 0 || iy >= self.h as isize {
                            line.fill(0.0);
                            continue;
                        }
                        let src = &sample[(ci * self.h + iy as usize) * self.w..][..self.w];
                        for (ox, slot) in line.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            *slot = if ix < 0 || ix >= self.w as isize {
                                0.0
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`ConvGeom::im2col`]: scatters columns back, accumulating.
    fn col2im(&self, cols: &[f64], sample: &mut [f64]) {
        let p = self.positions();
        for ci in 0..self.c {
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (ci * self.kh + ky) * self.kw + kx;
                    let src = &cols[row * p..(row + 1) * p];
                    for oy in 0..self.ho {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = &mut sample[(ci * self.h + iy as usize) * self.w..][..self.w];
                        for ox in 0..self.wo {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.w as isize {
                                dst[ix as usize] += src[oy * self.wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_conv_params(input: [usize; 4], spec: &ConvSpec, weights: &Tensor, bias: &Tensor) -> Result<()> {
    let expected = [spec.out_channels, input[1], spec.kernel_h, spec.kernel_w];
    if weights.shape() != expected {
        return shape_err(format!(
            "conv weights {:?} do not match input channels {} and spec {expected:?}",
            weights.shape(),
            input[1]
        ));
    }
    if bias.shape() != [spec.out_channels] {
        return shape_err(format!("conv bias {:?} expected [{}]", bias.shape(), spec.out_channels));
    }
    Ok(())
}

/// Cross-correlation plus per-channel bias, before the ReLU.
pub fn conv_forward_linear(input: &Tensor, spec: &ConvSpec, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let dims = dims4(input, "conv")?;
    check_conv_params(dims, spec, weights, bias)?;
    let g = ConvGeom::new(dims, spec)?;
    let n = dims[0];
    let f = spec.out_channels;
    let (patch, p) = (g.patch(), g.positions());
    let mut out = vec![0.0; n * f * p];
    let mut cols = vec![0.0; patch * p];
    let in_len = g.c * g.h * g.w;
    for (s, dst) in out.chunks_exact_mut(f * p).enumerate() {
        g.im2col(&input.data()[s * in_len..(s + 1) * in_len], &mut cols);
        for (fi, row) in dst.chunks_exact_mut(p).enumerate() {
            row.fill(bias.data()[fi]);
        }
        gemm(
            f,
            patch,
            p,
            1.0,
            MatRef::row_major(weights.data(), patch),
            MatRef::row_major(&cols, p),
            1.0,
            dst,
        );
    }
    Tensor::from_vec(&[n, f, g.ho, g.wo], out)
}

/// Convolution layer forward: cross-correlation, bias, ReLU.
pub fn conv_forward(input: &Tensor, spec: &ConvSpec, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    Ok(conv_forward_linear(input, spec, weights, bias)?.relu())
}

#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub d_input: Tensor,
    pub d_weights: Tensor,
    pub d_bias: Tensor,
}

/// Backward of [`conv_forward_linear`] given the gradient of its output.
pub fn conv_backward(input: &Tensor, spec: &ConvSpec, weights: &Tensor, d_out: &Tensor) -> Result<ParamGrads> {
    let dims = dims4(input, "conv")?;
    let g = ConvGeom::new(dims, spec)?;
    let n = dims[0];
    let f = spec.out_channels;
    let (patch, p) = (g.patch(), g.positions());
    if d_out.shape() != [n, f, g.ho, g.wo] {
        return shape_err(format!("conv output gradient has shape {:?}", d_out.shape()));
    }
    let in_len = g.c * g.h * g.w;
    let mut d_input = vec![0.0; input.len()];
    let mut d_w = vec![0.0; weights.len()];
    let mut d_b = vec![0.0; f];
    let mut cols = vec![0.0; patch * p];
    let mut d_cols = vec![0.0; patch * p];
    for s in 0..n {
        let dz = &d_out.data()[s * f * p..(s + 1) * f * p];
        for (fi, row) in dz.chunks_exact(p).enumerate() {
            d_b[fi] += row.iter().sum::<f64>();
        }
        g.im2col(&input.data()[s * in_len..(s + 1) * in_len], &mut cols);
        // dW += dZ * cols^T
        gemm(
            f,
            p,
            patch,
            1.0,
            MatRef::row_major(dz, p),
            MatRef::transposed(&cols, p),
            1.0,
            &mut d_w,
        );
        // dcols = W^T * dZ
        gemm(
            patch,
            f,
            p,
            1.0,
            MatRef::transposed(weights.data(), patch),
            MatRef::row_major(dz, p),
            0.0,
            &mut d_cols,
        );
        g.col2im(&d_cols, &mut d_input[s * in_len..(s + 1) * in_len]);
    }
    Ok(ParamGrads {
        d_input: Tensor::from_vec(input.shape(), d_input)?,
        d_weights: Tensor::from_vec(weights.shape(), d_w)?,
        d_bias: Tensor::from_vec(&[f], d_b)?,
    })
}

/// Max pooling. Returns the pooled tensor and, per output element, the flat
/// index into `input` of the selected maximum (lowest index on ties).
pub fn maxpool_forward(input: &Tensor, spec: &PoolSpec) -> Result<(Tensor, Vec<usize>)> {
    let [n, c, h, w] = dims4(input, "maxpool")?;
    if spec.window > h || spec.window > w {
        return shape_err(format!(
            "pool window {} exceeds spatial extent {h}x{w}",
            spec.window
        ));
    }
    let ho = conv_extent(h, spec.window, spec.stride, 0)?;
    let wo = conv_extent(w, spec.window, spec.stride, 0)?;
    let data = input.data();
    let mut out = Vec::with_capacity(n * c * ho * wo);
    let mut idx = Vec::with_capacity(n * c * ho * wo);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = base + oy * spec.stride * w + ox * spec.stride;
                for ky in 0..spec.window {
                    let row = base + (oy * spec.stride + ky) * w + ox * spec.stride;
                    for at in row..row + spec.window {
                        if data[at] > data[best] {
                            best = at;
                        }
                    }
                }
                out.push(data[best]);
                idx.push(best);
            }
        }
    }
    Ok((Tensor::from_vec(&[n, c, ho, wo], out)?, idx))
}

pub fn maxpool_backward(input_shape: &[usize], indices: &[usize], d_out: &Tensor) -> Result<Tensor> {
    if indices.len() != d_out.len() {
        return shape_err("pool indices do not match output gradient");
    }
    let mut d_in = Tensor::zeros(input_shape)?;
    let buf = d_in.data_mut();
    for (&i, &g) in indices.iter().zip(d_out.data()) {
        buf[i] += g;
    }
    Ok(d_in)
}

/// LRN forward. Returns the output and the per-element denominators
/// `k + alpha * sum(in^2)` (before the `beta` power).
pub fn lrn_forward(input: &Tensor, spec: &LrnSpec) -> Result<(Tensor, Tensor)> {
    let [n, c, h, w] = dims4(input, "lrn")?;
    let plane = h * w;
    let half = spec.size / 2;
    let x = input.data();
    let mut denom = vec![0.0; x.len()];
    for s in 0..n {
        let base = s * c * plane;
        for ch in 0..c {
            let lo = ch.saturating_sub(half);
            let hi = (ch + half).min(c - 1);
            let dst = &mut denom[base + ch * plane..base + (ch + 1) * plane];
            for (i, d) in dst.iter_mut().enumerate() {
                let mut acc = 0.0;
                for cc in lo..=hi {
                    let v = x[base + cc * plane + i];
                    acc += v * v;
                }
                *d = spec.k + spec.alpha * acc;
            }
        }
    }
    let out = x
        .iter()
        .zip(&denom)
        .map(|(&v, &d)| v * d.powf(-spec.beta))
        .collect();
    Ok((
        Tensor::from_vec(input.shape(), out)?,
        Tensor::from_vec(input.shape(), denom)?,
    ))
}

pub fn lrn_backward(input: &Tensor, denom: &Tensor, spec: &LrnSpec, d_out: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = dims4(input, "lrn")?;
    if denom.shape() != input.shape() || d_out.shape() != input.shape() {
        return shape_err("LRN backward shapes disagree");
    }
    let plane = h * w;
    let half = spec.size / 2;
    let (x, d, g) = (input.data(), denom.data(), d_out.data());
    // t[c] = g[c] * x[c] * d[c]^(-beta - 1)
    let t: Vec<f64> = (0..x.len())
        .map(|i| g[i] * x[i] * d[i].powf(-spec.beta - 1.0))
        .collect();
    let mut d_in = vec![0.0; x.len()];
    let coef = 2.0 * spec.alpha * spec.beta;
    for s in 0..n {
        let base = s * c * plane;
        for ch in 0..c {
            let lo = ch.saturating_sub(half);
            let hi = (ch + half).min(c - 1);
            for i in 0..plane {
                let at = base + ch * plane + i;
                let mut acc = 0.0;
                for cc in lo..=hi {
                    acc += t[base + cc * plane + i];
                }
                d_in[at] = g[at] * d[at].powf(-spec.beta) - coef * x[at] * acc;
            }
        }
    }
    Tensor::from_vec(input.shape(), d_in)
}

/// Intermediate values of one dense layer needed by its backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    /// Affine output `xW + b`.
    pub pre: Tensor,
    /// Activation applied to `pre`, before dropout.
    pub activated: Tensor,
    /// Inverted-dropout multipliers (`0` or `1/(1-p)`), present only in train mode with `p > 0`.
    pub mask: Option<Vec<f64>>,
    pub out: Tensor,
}

#[allow(clippy::too_many_arguments)]
pub fn dense_forward_cached(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    activation: Activation,
    dropout_rate: f64,
    mode: Mode,
    rng: &mut RandomSource,
) -> Result<DenseCache> {
    let [n, d] = dims2(input, "dense")?;
    let u = match *weights.shape() {
        [wd, u] if wd == d => u,
        _ => {
            return shape_err(format!(
                "dense weights {:?} do not accept input width {d}",
                weights.shape()
            ))
        }
    };
    if bias.shape() != [u] {
        return shape_err(format!("dense bias {:?} expected [{u}]", bias.shape()));
    }
    let mut pre = Vec::with_capacity(n * u);
    for _ in 0..n {
        pre.extend_from_slice(bias.data());
    }
    gemm(
        n,
        d,
        u,
        1.0,
        MatRef::row_major(input.data(), d),
        MatRef::row_major(weights.data(), u),
        1.0,
        &mut pre,
    );
    let pre = Tensor::from_vec(&[n, u], pre)?;
    let activated = match activation {
        Activation::None => pre.clone(),
        Activation::Tanh => pre.tanh(),
        Activation::Softmax => softmax_rows(&pre)?,
    };
    let (mask, out) = if mode == Mode::Train && dropout_rate > 0.0 {
        let keep_scale = 1.0 / (1.0 - dropout_rate);
        let mask: Vec<f64> = (0..activated.len())
            .map(|_| if rng.uniform() < dropout_rate { 0.0 } else { keep_scale })
            .collect();
        let out = activated
            .data()
            .iter()
            .zip(&mask)
            .map(|(a, m)| a * m)
            .collect();
        (Some(mask), Tensor::from_vec(&[n, u], out)?)
    } else {
        (None, activated.clone())
    };
    Ok(DenseCache {
        pre,
        activated,
        mask,
        out,
    })
}

/// Dense layer forward: affine map, activation, then inverted dropout in train mode.
pub fn dense_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    activation: Activation,
    dropout_rate: f64,
    mode: Mode,
    rng: &mut RandomSource,
) -> Result<Tensor> {
    Ok(dense_forward_cached(input, weights, bias, activation, dropout_rate, mode, rng)?.out)
}

/// Dense backward. For [`Activation::Softmax`] layers `d_out` is taken to be
/// the gradient with respect to the logits (`pre`), as produced by
/// [`crate::nn::softmax_cross_entropy`].
pub fn dense_backward(
    input: &Tensor,
    weights: &Tensor,
    cache: &DenseCache,
    activation: Activation,
    d_out: &Tensor,
) -> Result<ParamGrads> {
    let [n, d] = dims2(input, "dense")?;
    let u = weights.shape()[1];
    if d_out.shape() != [n, u] {
        return shape_err(format!("dense output gradient has shape {:?}", d_out.shape()));
    }
    let mut d_pre: Vec<f64> = match &cache.mask {
        Some(mask) => d_out.data().iter().zip(mask).map(|(g, m)| g * m).collect(),
        None => d_out.data().to_vec(),
    };
    if activation == Activation::Tanh {
        for (g, a) in d_pre.iter_mut().zip(cache.activated.data()) {
            *g *= 1.0 - a * a;
        }
    }
    let mut d_w = vec![0.0; d * u];
    gemm(
        d,
        n,
        u,
        1.0,
        MatRef::transposed(input.data(), d),
        MatRef::row_major(&d_pre, u),
        0.0,
        &mut d_w,
    );
    let mut d_b = vec![0.0; u];
    for row in d_pre.chunks_exact(u) {
        for (b, g) in d_b.iter_mut().zip(row) {
            *b += g;
        }
    }
    let mut d_in = vec![0.0; n * d];
    gemm(
        n,
        u,
        d,
        1.0,
        MatRef::row_major(&d_pre, u),
        MatRef::transposed(weights.data(), u),
        0.0,
        &mut d_in,
    );
    Ok(ParamGrads {
        d_input: Tensor::from_vec(&[n, d], d_in)?,
        d_weights: Tensor::from_vec(&[d, u], d_w)?,
        d_bias: Tensor::from_vec(&[u], d_b)?,
    })
}
