//! Randomized comparisons of the fast layers and blur against the naive
//! oracles. Each case returns the max absolute difference.

use acuity::image::blur;
use acuity::nn::layers::{conv_forward_linear, lrn_forward, maxpool_forward};
use acuity::nn::{ConvSpec, LrnSpec, PoolSpec};
use acuity::rng::RandomSource;

use super::{max_abs_diff, naive_blur, naive_conv, naive_lrn, naive_maxpool, random_image, random_tensor};

pub const ORACLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct ConvCase {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub spec: ConvSpec,
}

impl ConvCase {
    pub fn draw(rng: &mut RandomSource) -> Self {
        let pad = rng.below(3);
        let kernel_h = 1 + rng.below(5);
        let kernel_w = 1 + rng.below(5);
        // input at least as large as the kernel after padding
        let h = (kernel_h.saturating_sub(2 * pad)).max(1) + rng.below(7);
        let w = (kernel_w.saturating_sub(2 * pad)).max(1) + rng.below(7);
        Self {
            n: 1 + rng.below(3),
            c: 1 + rng.below(3),
            h,
            w,
            spec: ConvSpec { out_channels: 1 + rng.below(4), kernel_h, kernel_w, stride: 1 + rng.below(3), pad },
        }
    }

    pub fn max_diff(&self, seed: u64) -> f64 {
        let mut rng = RandomSource::new(seed);
        let s = &self.spec;
        let x = random_tensor(&[self.n, self.c, self.h, self.w], &mut rng);
        let wt = random_tensor(&[s.out_channels, self.c, s.kernel_h, s.kernel_w], &mut rng);
        let b = random_tensor(&[s.out_channels], &mut rng);
        let fast = conv_forward_linear(&x, s, &wt, &b).unwrap();
        max_abs_diff(fast.data(), &naive_conv(&x, &wt, &b, s))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PoolCase {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub spec: PoolSpec,
}

impl PoolCase {
    pub fn draw(rng: &mut RandomSource) -> Self {
        let window = 1 + rng.below(4);
        Self {
            n: 1 + rng.below(3),
            c: 1 + rng.below(4),
            h: window + rng.below(8),
            w: window + rng.below(8),
            spec: PoolSpec { window, stride: 1 + rng.below(3) },
        }
    }

    pub fn max_diff(&self, seed: u64) -> f64 {
        let mut rng = RandomSource::new(seed);
        let x = random_tensor(&[self.n, self.c, self.h, self.w], &mut rng);
        let (fast, _) = maxpool_forward(&x, &self.spec).unwrap();
        max_abs_diff(fast.data(), &naive_maxpool(&x, &self.spec))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LrnCase {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub spec: LrnSpec,
}

impl LrnCase {
    pub fn draw(rng: &mut RandomSource) -> Self {
        Self {
            n: 1 + rng.below(2),
            c: 1 + rng.below(8),
            h: 1 + rng.below(5),
            w: 1 + rng.below(5),
            spec: LrnSpec {
                size: 1 + 2 * rng.below(3),
                k: rng.uniform_range(0.5, 3.0),
                alpha: rng.uniform_range(1e-4, 1.0),
                beta: rng.uniform_range(0.25, 1.0),
            },
        }
    }

    pub fn max_diff(&self, seed: u64) -> f64 {
        let mut rng = RandomSource::new(seed);
        let x = random_tensor(&[self.n, self.c, self.h, self.w], &mut rng);
        let (fast, _) = lrn_forward(&x, &self.spec).unwrap();
        max_abs_diff(fast.data(), &naive_lrn(&x, &self.spec))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BlurCase {
    pub h: usize,
    pub w: usize,
    pub sigma: f64,
}

impl BlurCase {
    pub fn draw(rng: &mut RandomSource) -> Self {
        let sigma = if rng.bernoulli(0.1) { 0.0 } else { rng.uniform_range(0.2, 3.0) };
        Self { h: 1 + rng.below(16), w: 1 + rng.below(16), sigma }
    }

    pub fn max_diff(&self, seed: u64) -> f64 {
        let mut rng = RandomSource::new(seed);
        let img = random_image(self.h, self.w, &mut rng);
        max_abs_diff(blur(&img, self.sigma).unwrap().pixels(), &naive_blur(&img, self.sigma))
    }
}
