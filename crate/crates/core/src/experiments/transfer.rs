//! Linear-probe transfer: frozen hidden-layer features plus a linear SVM.

use serde::{Deserialize, Serialize};

use crate::dataset::ImageRecord;
use crate::error::{param_err, Result};
use crate::experiments::eval::{extract_features, EvalDegradation};
use crate::experiments::svm::{train_linear_svm, SvmConfig};
use crate::nn::NetworkState;
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferPoint {
    pub layer: usize,
    pub dim: usize,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// For each layer in order: extract features of both target splits, fit the
/// SVM on train, and score both splits.
pub fn transfer_eval(
    network: &NetworkState,
    layers: &[usize],
    target_train: &[ImageRecord],
    target_test: &[ImageRecord],
    svm: &SvmConfig,
    seed: u64,
) -> Result<Vec<TransferPoint>> {
    if layers.is_empty() {
        return param_err("transfer needs at least one layer index");
    }
    let train_labels: Vec<usize> = target_train.iter().map(|r| r.identity).collect();
    let test_labels: Vec<usize> = target_test.iter().map(|r| r.identity).collect();
    let root = RandomSource::new(seed);
    layers
        .iter()
        .map(|&layer| {
            let f_train = extract_features(network, layer, target_train, EvalDegradation::None)?;
            let f_test = extract_features(network, layer, target_test, EvalDegradation::None)?;
            let clf = train_linear_svm(&f_train, &train_labels, svm, &mut root.child(layer as u64))?;
            Ok(TransferPoint {
                layer,
                dim: clf.dim,
                train_acc: clf.accuracy(&f_train, &train_labels)?,
                test_acc: clf.accuracy(&f_test, &test_labels)?,
            })
        })
        .collect()
}

/// Indices of layers whose outputs can serve as transfer features: every
/// layer except the classifier.
pub fn hidden_layers(network: &NetworkState) -> Vec<usize> {
    (0..network.specs().len().saturating_sub(1)).collect()
}
