//! First-layer receptive-field extent.
//!
//! A filter's extent is `2 * sqrt(M2)`, where `M2` is the second central
//! moment of `|w|` (summed over input channels and normalized to a
//! distribution) about its spatial centroid, in pixels squared.

use serde::{Deserialize, Serialize};

use crate::error::{data_err, shape_err, Result};
use crate::nn::{LayerSpec, NetworkState};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfSummary {
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfReport {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub extents: Vec<f64>,
    /// Indices of all-zero filters (reported with extent 0).
    pub zero_filters: Vec<usize>,
    pub summary: RfSummary,
}

/// Extent of one `kh x kw` spatial mass map; `None` when all-zero.
pub fn filter_extent(mass: &[f64], kh: usize, kw: usize) -> Option<f64> {
    debug_assert_eq!(mass.len(), kh * kw);
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let (mut cy, mut cx) = (0.0, 0.0);
    for (i, &m) in mass.iter().enumerate() {
        cy += m * (i / kw) as f64;
        cx += m * (i % kw) as f64;
    }
    cy /= total;
    cx /= total;
    let m2: f64 = mass
        .iter()
        .enumerate()
        .map(|(i, &m)| m * (((i / kw) as f64 - cy).powi(2) + ((i % kw) as f64 - cx).powi(2)))
        .sum::<f64>()
        / total;
    Some(2.0 * m2.sqrt())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Report over weights shaped `[F, C, kh, kw]`.
pub fn receptive_field_extent(weights: &Tensor) -> Result<RfReport> {
    let &[f, c, kh, kw] = weights.shape() else {
        return shape_err(format!("expected [F, C, kh, kw] weights, got {:?}", weights.shape()));
    };
    if f == 0 {
        return shape_err("no filters");
    }
    let per_filter = c * kh * kw;
    let mut extents = Vec::with_capacity(f);
    let mut zero_filters = Vec::new();
    for (i, w) in weights.data().chunks_exact(per_filter).enumerate() {
        let mut mass = vec![0.0; kh * kw];
        for ch in w.chunks_exact(kh * kw) {
            for (m, v) in mass.iter_mut().zip(ch) {
                *m += v.abs();
            }
        }
        match filter_extent(&mass, kh, kw) {
            Some(e) => extents.push(e),
            None => {
                zero_filters.push(i);
                extents.push(0.0);
            }
        }
    }
    let mut sorted = extents.clone();
    sorted.sort_by(f64::total_cmp);
    let summary = RfSummary {
        mean: extents.iter().sum::<f64>() / f as f64,
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        min: sorted[0],
        max: sorted[f - 1],
    };
    Ok(RfReport {
        kernel_h: kh,
        kernel_w: kw,
        extents,
        zero_filters,
        summary,
    })
}

/// Report for the network's first layer, which must be a convolution.
pub fn network_rf_report(network: &NetworkState) -> Result<RfReport> {
    match network.specs().first() {
        Some(LayerSpec::Conv(_)) => receptive_field_extent(&network.params()[0][0]),
        other => data_err(format!(
            "first layer is {}, not a convolution",
            other.map_or("missing", |s| s.kind_name())
        )),
    }
}
