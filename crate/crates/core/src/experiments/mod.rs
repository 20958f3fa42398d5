//! Evaluation sweeps, aggregation, receptive fields, and feature transfer.

mod eval;
pub mod report;
mod rf;
mod svm;
mod sweep;
mod transfer;

pub use eval::{evaluate_accuracy, extract_features, predict_records, EvalDegradation, EVAL_CHUNK};
pub use rf::{filter_extent, network_rf_report, receptive_field_extent, RfReport, RfSummary};
pub use svm::{binary_objective, standardization, train_linear_svm, LinearClassifier, SvmConfig};
pub use sweep::{
    aggregate, auc, blur_sweep, repeat_and_aggregate, shrink_sweep, standard_error, sweep, AxisKind, SweepPoint,
    SweepResult, DEFAULT_FACTORS, DEFAULT_SIGMAS,
};
pub use transfer::{hidden_layers, transfer_eval, TransferPoint};
