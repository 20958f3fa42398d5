use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stack_images, ImageRecord};
use crate::error::{data_err, Result};
use crate::image::{blur, shrink_and_center, GrayImage};
use crate::nn::NetworkState;
use crate::tensor::Tensor;

/// Test-time degradation applied to every image before the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EvalDegradation {
    None,
    Blur(f64),
    Shrink(f64),
}

impl EvalDegradation {
    pub fn apply(&self, image: &GrayImage) -> Result<GrayImage> {
        match *self {
            EvalDegradation::None => Ok(image.clone()),
            EvalDegradation::Blur(sigma) => blur(image, sigma),
            EvalDegradation::Shrink(factor) => shrink_and_center(image, factor),
        }
    }
}

/// Images per forward pass during evaluation.
pub const EVAL_CHUNK: usize = 64;

/// Eval-mode outputs of `layer` for every record, in record order, computed
/// in parallel chunks. Each row is flattened.
pub(crate) fn layer_outputs(
    network: &NetworkState,
    layer: usize,
    records: &[ImageRecord],
    degradation: EvalDegradation,
) -> Result<Vec<Vec<f64>>> {
    let chunks: Vec<Vec<Vec<f64>>> = records
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| -> Result<Vec<Vec<f64>>> {
            let x = stack_images(chunk.iter().map(|r| &r.image), |img| degradation.apply(img))?;
            let out = network.forward_to(&x, layer)?;
            let d = out.len() / chunk.len();
            Ok(out.data().chunks_exact(d).map(<[f64]>::to_vec).collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Predicted class per record, eval mode (no dropout, no augmentation).
pub fn predict_records(network: &NetworkState, records: &[ImageRecord], degradation: EvalDegradation) -> Result<Vec<usize>> {
    if records.is_empty() {
        return data_err("no records to evaluate");
    }
    let last = network.specs().len() - 1;
    let rows = layer_outputs(network, last, records, degradation)?;
    Ok(rows.iter().map(|r| crate::tensor::argmax(r)).collect())
}

pub fn evaluate_accuracy(network: &NetworkState, records: &[ImageRecord], degradation: EvalDegradation) -> Result<f64> {
    let k = network.n_classes();
    if let Some(r) = records.iter().find(|r| r.identity >= k) {
        return data_err(format!(
            "record {} has identity {} but the network has {k} classes",
            r.source, r.identity
        ));
    }
    let preds = predict_records(network, records, degradation)?;
    let correct = preds.iter().zip(records).filter(|(p, r)| **p == r.identity).count();
    Ok(correct as f64 / records.len() as f64)
}

/// Flattened eval-mode activations of hidden layer `layer`, one row per record.
pub fn extract_features(
    network: &NetworkState,
    layer: usize,
    records: &[ImageRecord],
    degradation: EvalDegradation,
) -> Result<Tensor> {
    let n_layers = network.specs().len();
    if layer + 1 >= n_layers {
        return crate::error::param_err(format!(
            "layer {layer} is not a hidden layer (network has {n_layers} layers, the last is the classifier)"
        ));
    }
    if records.is_empty() {
        return data_err("no records to extract features from");
    }
    let rows = layer_outputs(network, layer, records, degradation)?;
    let d = rows[0].len();
    Tensor::from_vec(&[rows.len(), d], rows.into_iter().flatten().collect())
}
