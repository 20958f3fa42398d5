//! One-vs-rest linear SVM trained by seeded stochastic subgradient descent.
//!
//! Each class `k` minimizes, over standardized features `z`,
//! `lambda/2 * |w_k|^2 + mean_i max(0, 1 - y_ik (w_k . z_i + b_k))`
//! with `y_ik = +1` for class `k` and `-1` otherwise. The bias is not
//! regularized.

use serde::{Deserialize, Serialize};

use crate::error::{data_err, param_err, shape_err, Result};
use crate::rng::RandomSource;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 200,
            lr: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    /// `[D, K]`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub dim: usize,
    pub n_classes: usize,
    pub feature_mean: Vec<f64>,
    /// Standard deviations; zero-variance dimensions are stored as 1.
    pub feature_std: Vec<f64>,
}

fn rows(features: &Tensor) -> Result<(usize, usize)> {
    match *features.shape() {
        [n, d] => Ok((n, d)),
        _ => shape_err(format!("features must be [N, D], got {:?}", features.shape())),
    }
}

/// Per-dimension mean and population standard deviation (1 where constant).
pub fn standardization(features: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, d) = rows(features)?;
    let x = features.data();
    let mut mean = vec![0.0; d];
    for row in x.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for row in x.chunks_exact(d) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n as f64).sqrt();
            if sd > 1e-12 { sd } else { 1.0 }
        })
        .collect();
    Ok((mean, std))
}

fn standardize(x: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    x.chunks_exact(mean.len())
        .flat_map(|row| row.iter().zip(mean).zip(std).map(|((v, m), s)| (v - m) / s))
        .collect()
}

/// Objective of one binary problem on already-standardized rows `z`.
pub fn binary_objective(z: &[f64], y: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let d = w.len();
    let hinge: f64 = z
        .chunks_exact(d)
        .zip(y)
        .map(|(row, &yi)| (1.0 - yi * (dot(row, w) + b)).max(0.0))
        .sum();
    lambda / 2.0 * dot(w, w) + hinge / y.len() as f64
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pegasos-style steps `lr / (1 + lr * lambda * t)`; returns the best of
/// the per-epoch iterates and their running average under the full objective.
fn fit_binary(z: &[f64], y: &[f64], d: usize, cfg: &SvmConfig, rng: &mut RandomSource) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut avg_w = vec![0.0; d];
    let mut avg_b = 0.0;
    let mut best = (w.clone(), b, binary_objective(z, y, &w, b, cfg.lambda));
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0u64;
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let eta = cfg.lr / (1.0 + cfg.lr * cfg.lambda * t as f64);
            let row = &z[i * d..(i + 1) * d];
            let violated = y[i] * (dot(row, &w) + b) < 1.0;
            for (wj, xj) in w.iter_mut().zip(row) {
                *wj -= eta * (cfg.lambda * *wj - if violated { y[i] * xj } else { 0.0 });
            }
            if violated {
                b += eta * y[i];
            }
            t += 1;
        }
        let k = (epoch + 1) as f64;
        for (a, wj) in avg_w.iter_mut().zip(&w) {
            *a += (wj - *a) / k;
        }
        avg_b += (b - avg_b) / k;
        for (cw, cb) in [(&w, b), (&avg_w, avg_b)] {
            let obj = binary_objective(z, y, cw, cb, cfg.lambda);
            if obj < best.2 {
                best = (cw.clone(), cb, obj);
            }
        }
    }
    (best.0, best.1)
}

pub fn train_linear_svm(features: &Tensor, labels: &[usize], cfg: &SvmConfig, rng: &mut RandomSource) -> Result<LinearClassifier> {
    let (n, d) = rows(features)?;
    if labels.len() != n {
        return shape_err(format!("{} labels for {n} feature rows", labels.len()));
    }
    if !(cfg.lambda >= 0.0 && cfg.lr > 0.0) || cfg.epochs == 0 {
        return param_err(format!("invalid SVM config {cfg:?}"));
    }
    if !features.all_finite() {
        return data_err("non-finite features");
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let distinct = {
        let mut seen = vec![false; k];
        labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return data_err("SVM needs at least two distinct classes");
    }
    let (feature_mean, feature_std) = standardization(features)?;
    let z = standardize(features.data(), &feature_mean, &feature_std);
    let mut weights = vec![0.0; d * k];
    let mut bias = vec![0.0; k];
    for class in 0..k {
        let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        let (w, b) = fit_binary(&z, &y, d, cfg, &mut rng.child(class as u64));
        for (j, wj) in w.into_iter().enumerate() {
            weights[j * k + class] = wj;
        }
        bias[class] = b;
    }
    Ok(LinearClassifier {
        weights,
        bias,
        dim: d,
        n_classes: k,
        feature_mean,
        feature_std,
    })
}

impl LinearClassifier {
    /// Per-class scores `[N, K]`.
    pub fn decision(&self, features: &Tensor) -> Result<Tensor> {
        let (n, d) = rows(features)?;
        if d != self.dim {
            return shape_err(format!("classifier expects {} features, got {d}", self.dim));
        }
        let z = standardize(features.data(), &self.feature_mean, &self.feature_std);
        let mut out = Vec::with_capacity(n * self.n_classes);
        for row in z.chunks_exact(d) {
            for c in 0..self.n_classes {
                let s: f64 = row.iter().enumerate().map(|(j, x)| x * self.weights[j * self.n_classes + c]).sum();
                out.push(s + self.bias[c]);
            }
        }
        Tensor::from_vec(&[n, self.n_classes], out)
    }

    pub fn predict(&self, features: &Tensor) -> Result<Vec<usize>> {
        self.decision(features)?.argmax_axis(1)
    }

    pub fn accuracy(&self, features: &Tensor, labels: &[usize]) -> Result<f64> {
        let preds = self.predict(features)?;
        if preds.len() != labels.len() {
            return shape_err("label count does not match feature rows");
        }
        Ok(preds.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64)
    }

    /// Weights of one class's binary problem (in standardized feature space).
    pub fn class_weights(&self, class: usize) -> Vec<f64> {
        (0..self.dim).map(|j| self.weights[j * self.n_classes + class]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_rejected() {
        let x = Tensor::from_vec(&[3, 1], vec![0.0, 1.0, 2.0]).unwrap();
        assert!(train_linear_svm(&x, &[1, 1, 1], &SvmConfig::default(), &mut RandomSource::new(0)).is_err());
    }

    #[test]
    fn constant_dimension_is_harmless() {
        let x = Tensor::from_vec(&[4, 2], vec![0.0, 5.0, 1.0, 5.0, 3.0, 5.0, 4.0, 5.0]).unwrap();
        let clf = train_linear_svm(&x, &[0, 0, 1, 1], &SvmConfig::default(), &mut RandomSource::new(0)).unwrap();
        assert_eq!(clf.feature_std[1], 1.0);
        assert_eq!(clf.accuracy(&x, &[0, 0, 1, 1]).unwrap(), 1.0);
    }
}
