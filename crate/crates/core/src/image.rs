//! Grayscale images and the acuity-degradation / augmentation operations:
//! Gaussian blur, shrink-and-center, flips, rotations, corpus normalization.

use serde::{Deserialize, Serialize};

use crate::error::{data_err, param_err, shape_err, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return shape_err(format!("image dimensions must be positive, got {height}x{width}"));
        }
        if pixels.len() != height * width {
            return shape_err(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            ));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return data_err("image contains non-finite pixels");
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Population variance of the pixel values.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.pixels.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / self.pixels.len() as f64
    }

    /// Reads `(y, x)` with out-of-range coordinates clamped to the border.
    fn clamped(&self, y: isize, x: isize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.pixels[y * self.width + x]
    }

    /// Reads `(y, x)` with out-of-range coordinates reading as zero.
    fn zero_padded(&self, y: isize, x: isize) -> f64 {
        if y < 0 || x < 0 || y >= self.height as isize || x >= self.width as isize {
            0.0
        } else {
            self.pixels[y as usize * self.width + x as usize]
        }
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Bilinear sample at fractional `(sy, sx)` using `read` for the four taps.
fn bilinear(sy: f64, sx: f64, read: impl Fn(isize, isize) -> f64) -> f64 {
    let y0 = sy.floor();
    let x0 = sx.floor();
    let (fy, fx) = (sy - y0, sx - x0);
    let (y0, x0) = (y0 as isize, x0 as isize);
    let top = lerp(read(y0, x0), read(y0, x0 + 1), fx);
    let bottom = lerp(read(y0 + 1, x0), read(y0 + 1, x0 + 1), fx);
    lerp(top, bottom, fy)
}

/// Normalized, symmetric 1-D Gaussian truncated at `ceil(3 sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    pub sigma: f64,
    pub radius: usize,
    pub weights: Vec<f64>,
}

pub fn gaussian_kernel(sigma: f64) -> Result<GaussianKernel> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return param_err(format!("blur sigma must be finite and >= 0, got {sigma}"));
    }
    if sigma == 0.0 {
        return Ok(GaussianKernel {
            sigma,
            radius: 0,
            weights: vec![1.0],
        });
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let raw: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    // Sum symmetric pairs from the tails inward so weights[i] == weights[2r - i] holds exactly.
    let mut total = raw[radius];
    for i in 0..radius {
        total += 2.0 * raw[i];
    }
    let weights = raw.iter().map(|w| w / total).collect();
    Ok(GaussianKernel {
        sigma,
        radius,
        weights,
    })
}

/// Separable Gaussian blur, horizontal then vertical, with edge replication.
pub fn blur(image: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let kernel = gaussian_kernel(sigma)?;
    if kernel.radius == 0 {
        return Ok(image.clone());
    }
    let (h, w) = (image.height, image.width);
    let r = kernel.radius as isize;
    let mut horizontal = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            horizontal[y * w + x] = kernel
                .weights
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * image.clamped(y as isize, x as isize + k as isize - r))
                .sum();
        }
    }
    let mid = GrayImage {
        height: h,
        width: w,
        pixels: horizontal,
    };
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .weights
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * mid.clamped(y as isize + k as isize - r, x as isize))
                .sum();
        }
    }
    GrayImage::new(h, w, out)
}

/// Bilinear resize with half-pixel centers and border clamping.
pub fn resize_bilinear(image: &GrayImage, height: usize, width: usize) -> Result<GrayImage> {
    if height == 0 || width == 0 {
        return shape_err(format!("cannot resize to {height}x{width}"));
    }
    if height == image.height && width == image.width {
        return Ok(image.clone());
    }
    let sy = image.height as f64 / height as f64;
    let sx = image.width as f64 / width as f64;
    let max_y = (image.height - 1) as f64;
    let max_x = (image.width - 1) as f64;
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        for x in 0..width {
            let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            out.push(bilinear(src_y, src_x, |yy, xx| image.clamped(yy, xx)));
        }
    }
    GrayImage::new(height, width, out)
}

/// Resamples the image to `round(factor * size)` and centers it on a zero
/// canvas of the original size. Odd margins put the extra pixel at the
/// bottom/right.
pub fn shrink_and_center(image: &GrayImage, factor: f64) -> Result<GrayImage> {
    if !(factor > 0.0 && factor <= 1.0) {
        return param_err(format!("shrink factor must be in (0, 1], got {factor}"));
    }
    if factor == 1.0 {
        return Ok(image.clone());
    }
    let (h, w) = (image.height, image.width);
    let ih = ((factor * h as f64).round() as usize).clamp(1, h);
    let iw = ((factor * w as f64).round() as usize).clamp(1, w);
    let inner = resize_bilinear(image, ih, iw)?;
    let top = (h - ih) / 2;
    let left = (w - iw) / 2;
    let mut out = vec![0.0; h * w];
    for y in 0..ih {
        out[(top + y) * w + left..(top + y) * w + left + iw]
            .copy_from_slice(&inner.pixels[y * iw..(y + 1) * iw]);
    }
    GrayImage::new(h, w, out)
}

pub fn flip_horizontal(image: &GrayImage) -> GrayImage {
    let mut pixels = image.pixels.clone();
    for row in pixels.chunks_exact_mut(image.width) {
        row.reverse();
    }
    GrayImage {
        height: image.height,
        width: image.width,
        pixels,
    }
}

/// Rotates about the image center by `angle_deg` (clockwise on screen for
/// positive angles, with y pointing down). Bilinear resampling; source
/// pixels outside the image read as zero.
pub fn rotate(image: &GrayImage, angle_deg: f64) -> GrayImage {
    if angle_deg == 0.0 {
        return image.clone();
    }
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let cy = (image.height as f64 - 1.0) / 2.0;
    let cx = (image.width as f64 - 1.0) / 2.0;
    let mut pixels = Vec::with_capacity(image.pixels.len());
    for y in 0..image.height {
        let dy = y as f64 - cy;
        for x in 0..image.width {
            let dx = x as f64 - cx;
            let src_x = cx + cos * dx + sin * dy;
            let src_y = cy - sin * dx + cos * dy;
            pixels.push(bilinear(src_y, src_x, |yy, xx| image.zero_padded(yy, xx)));
        }
    }
    GrayImage {
        height: image.height,
        width: image.width,
        pixels,
    }
}

/// Horizontal flip with probability 0.5, then rotation by an angle drawn
/// uniformly from `[-max_angle_deg, max_angle_deg]`. Always consumes two draws.
pub fn random_flip_rotate(image: &GrayImage, rng: &mut RandomSource, max_angle_deg: f64) -> Result<GrayImage> {
    if !(max_angle_deg >= 0.0) {
        return param_err(format!("max rotation angle must be >= 0, got {max_angle_deg}"));
    }
    let flip = rng.uniform() < 0.5;
    let angle = (2.0 * rng.uniform() - 1.0) * max_angle_deg;
    let posed = if flip {
        flip_horizontal(image)
    } else {
        image.clone()
    };
    Ok(rotate(&posed, angle))
}

/// Corpus-wide luminance statistics (population standard deviation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: f64,
    pub std: f64,
}

impl NormalizationStats {
    pub fn compute(images: &[GrayImage]) -> Result<Self> {
        let count: usize = images.iter().map(|i| i.pixels.len()).sum();
        if count == 0 {
            return data_err("cannot compute statistics of an empty corpus");
        }
        let mean = images.iter().flat_map(|i| &i.pixels).sum::<f64>() / count as f64;
        let var = images
            .iter()
            .flat_map(|i| &i.pixels)
            .map(|p| (p - mean) * (p - mean))
            .sum::<f64>()
            / count as f64;
        let std = var.sqrt();
        if !(std > 0.0) {
            return data_err("corpus is constant; standard deviation is zero");
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, image: &GrayImage) -> GrayImage {
        image.map(|p| (p - self.mean) / self.std)
    }
}

/// Zero-centers and scales every image by one mean and std computed over all
/// pixels jointly. The returned stats can be applied to held-out data.
pub fn normalize_corpus(images: &[GrayImage]) -> Result<(Vec<GrayImage>, NormalizationStats)> {
    let stats = NormalizationStats::compute(images)?;
    Ok((images.iter().map(|i| stats.apply(i)).collect(), stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(h: usize, w: usize, seed: u64) -> GrayImage {
        let mut rng = RandomSource::new(seed);
        GrayImage::new(h, w, (0..h * w).map(|_| rng.uniform()).collect()).unwrap()
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(gaussian_kernel(0.0).unwrap().weights, vec![1.0]);
        let k = gaussian_kernel(1.0).unwrap();
        assert_eq!(k.radius, 3);
        let oracle: f64 = (-3..=3).map(|x: i32| (-(x * x) as f64 / 2.0).exp()).sum();
        assert!((k.weights[3] - 1.0 / oracle).abs() < 1e-15);
        assert!(gaussian_kernel(-0.1).is_err());
        for sigma in [0.3, 1.7, 4.0] {
            let k = gaussian_kernel(sigma).unwrap();
            let r = k.radius;
            for i in 0..=2 * r {
                assert_eq!(k.weights[i], k.weights[2 * r - i]);
            }
        }
    }

    #[test]
    fn blur_fixed_points() {
        let c = GrayImage::filled(7, 9, 0.375).unwrap();
        let b = blur(&c, 2.0).unwrap();
        assert!(b.pixels().iter().all(|p| (p - 0.375).abs() < 1e-15));
        let img = pattern(8, 8, 1);
        assert_eq!(blur(&img, 0.0).unwrap(), img);
    }

    #[test]
    fn shrink_examples() {
        let img = pattern(10, 10, 2);
        assert_eq!(shrink_and_center(&img, 1.0).unwrap(), img);
        let c = GrayImage::filled(100, 100, 0.8).unwrap();
        let s = shrink_and_center(&c, 0.5).unwrap();
        for y in 0..100 {
            for x in 0..100 {
                let inside = (25..75).contains(&y) && (25..75).contains(&x);
                assert_eq!(s.get(y, x), if inside { 0.8 } else { 0.0 }, "({y},{x})");
            }
        }
        let s = shrink_and_center(&c, 0.12).unwrap();
        let rows: Vec<usize> = (0..100).filter(|&y| s.get(y, 50) != 0.0).collect();
        assert_eq!(rows.first(), Some(&44));
        assert_eq!(rows.len(), 12);
        assert!(shrink_and_center(&c, 0.0).is_err());
        assert!(shrink_and_center(&c, 1.5).is_err());
    }

    #[test]
    fn odd_margin_goes_bottom_right() {
        let c = GrayImage::filled(5, 5, 1.0).unwrap();
        let s = shrink_and_center(&c, 0.4).unwrap();
        // inner 2x2, margins 1 top/left and 2 bottom/right
        let lit: Vec<(usize, usize)> = (0..5)
            .flat_map(|y| (0..5).map(move |x| (y, x)))
            .filter(|&(y, x)| s.get(y, x) != 0.0)
            .collect();
        assert_eq!(lit, vec![(1, 1), (1, 2), (2, 1), (2, 2)]);
    }

    #[test]
    fn flips_and_rotations() {
        let img = pattern(6, 5, 3);
        assert_eq!(flip_horizontal(&flip_horizontal(&img)), img);
        assert_eq!(random_flip_rotate(&img, &mut RandomSource::new(0), 0.0).map(|o| o.height()).unwrap(), 6);

        let sq = GrayImage::new(3, 3, (1..=9).map(f64::from).collect()).unwrap();
        let r = rotate(&sq, 90.0);
        for y in 0..3 {
            for x in 0..3 {
                assert!((r.get(y, x) - sq.get(2 - x, y)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_angle_without_flip_is_identity() {
        let img = pattern(5, 5, 4);
        // find a seed whose first draw says "no flip"
        let seed = (0..)
            .find(|&s| RandomSource::new(s).uniform() >= 0.5)
            .unwrap();
        let out = random_flip_rotate(&img, &mut RandomSource::new(seed), 0.0).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn normalization_examples() {
        let corpus = vec![
            GrayImage::new(1, 2, vec![0.0, 0.0]).unwrap(),
            GrayImage::new(1, 2, vec![2.0, 2.0]).unwrap(),
        ];
        let (out, stats) = normalize_corpus(&corpus).unwrap();
        assert_eq!(stats, NormalizationStats { mean: 1.0, std: 1.0 });
        assert_eq!(out[0].pixels(), &[-1.0, -1.0]);
        assert_eq!(out[1].pixels(), &[1.0, 1.0]);

        let flat = vec![GrayImage::filled(2, 2, 3.0).unwrap()];
        assert!(matches!(normalize_corpus(&flat), Err(crate::Error::Data(_))));

        let (again, stats2) = normalize_corpus(&out).unwrap();
        assert!(stats2.mean.abs() < 1e-12 && (stats2.std - 1.0).abs() < 1e-12);
        for (a, b) in again.iter().zip(&out) {
            assert!(a.pixels().iter().zip(b.pixels()).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }
}
