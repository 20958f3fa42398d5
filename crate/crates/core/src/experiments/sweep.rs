use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ImageRecord;
use crate::error::{param_err, Error, Result};
use crate::experiments::eval::{evaluate_accuracy, EvalDegradation};
use crate::nn::NetworkState;

pub const DEFAULT_SIGMAS: [f64; 5] = [0.0, 1.0, 2.0, 3.0, 4.0];
pub const DEFAULT_FACTORS: [f64; 7] = [1.0, 0.9, 0.8, 0.4, 0.2, 0.14, 0.12];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    BlurSigma,
    ShrinkFactor,
}

impl AxisKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisKind::BlurSigma => "blur_sigma",
            AxisKind::ShrinkFactor => "shrink_factor",
        }
    }

    pub fn degradation(self, param: f64) -> EvalDegradation {
        match self {
            AxisKind::BlurSigma => EvalDegradation::Blur(param),
            AxisKind::ShrinkFactor => EvalDegradation::Shrink(param),
        }
    }

    pub fn default_params(self) -> Vec<f64> {
        match self {
            AxisKind::BlurSigma => DEFAULT_SIGMAS.to_vec(),
            AxisKind::ShrinkFactor => DEFAULT_FACTORS.to_vec(),
        }
    }

    /// Canonical output order: blur ascending, shrink descending (from the
    /// undegraded end).
    fn sort(self, params: &mut [f64]) {
        params.sort_by(f64::total_cmp);
        if self == AxisKind::ShrinkFactor {
            params.reverse();
        }
    }
}

impl std::str::FromStr for AxisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "blur" | "blur_sigma" => Ok(AxisKind::BlurSigma),
            "shrink" | "shrink_factor" => Ok(AxisKind::ShrinkFactor),
            other => param_err(format!("unknown sweep axis {other:?} (expected blur|shrink)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: f64,
    pub mean: f64,
    pub ste: f64,
    pub n_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: AxisKind,
    pub points: Vec<SweepPoint>,
    pub auc: f64,
    /// Set when fewer than two distinct parameters make the AUC undefined.
    pub auc_degenerate: bool,
}

/// Trapezoidal area under `(param, value)` divided by the parameter span.
/// Point order does not matter. Returns `(0, true)` when the span is empty.
pub fn auc(points: &[(f64, f64)]) -> (f64, bool) {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let span = match (sorted.first(), sorted.last()) {
        (Some(a), Some(b)) => b.0 - a.0,
        _ => 0.0,
    };
    if sorted.len() < 2 || span <= 0.0 {
        return (0.0, true);
    }
    // integrate deviations from the first value so a constant curve is exact
    let base = sorted[0].1;
    let area: f64 = sorted
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * ((w[0].1 - base) + (w[1].1 - base)) / 2.0)
        .sum();
    (base + area / span, false)
}

/// Sample standard deviation over `sqrt(n)`; zero for a single value.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn finish(axis: AxisKind, points: Vec<SweepPoint>) -> SweepResult {
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.param, p.mean)).collect();
    let (auc, auc_degenerate) = auc(&pairs);
    SweepResult {
        axis,
        points,
        auc,
        auc_degenerate,
    }
}

/// Accuracy at each parameter value for one network.
pub fn sweep(network: &NetworkState, records: &[ImageRecord], axis: AxisKind, params: &[f64]) -> Result<SweepResult> {
    if params.is_empty() {
        return param_err("sweep needs at least one parameter value");
    }
    let mut params = params.to_vec();
    axis.sort(&mut params);
    params.dedup();
    let points = params
        .par_iter()
        .map(|&param| {
            Ok(SweepPoint {
                param,
                mean: evaluate_accuracy(network, records, axis.degradation(param))?,
                ste: 0.0,
                n_reps: 1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(axis, points))
}

pub fn blur_sweep(network: &NetworkState, records: &[ImageRecord], sigmas: &[f64]) -> Result<SweepResult> {
    sweep(network, records, AxisKind::BlurSigma, sigmas)
}

pub fn shrink_sweep(network: &NetworkState, records: &[ImageRecord], factors: &[f64]) -> Result<SweepResult> {
    sweep(network, records, AxisKind::ShrinkFactor, factors)
}

/// Pointwise mean and standard error across repetitions of the same sweep.
pub fn aggregate(runs: &[SweepResult]) -> Result<SweepResult> {
    let first = runs.first().ok_or_else(|| Error::Param("nothing to aggregate".into()))?;
    for r in runs {
        let same_axis = r.axis == first.axis && r.points.len() == first.points.len();
        if !same_axis || r.points.iter().zip(&first.points).any(|(a, b)| a.param != b.param) {
            return param_err("repetitions were swept over different parameters");
        }
    }
    let n = runs.len();
    let points = (0..first.points.len())
        .map(|i| {
            let values: Vec<f64> = runs.iter().map(|r| r.points[i].mean).collect();
            SweepPoint {
                param: first.points[i].param,
                mean: values.iter().sum::<f64>() / n as f64,
                ste: standard_error(&values),
                n_reps: n,
            }
        })
        .collect();
    Ok(finish(first.axis, points))
}

/// Runs `run(base_seed + i)` for `i < n_reps` and aggregates the sweeps.
pub fn repeat_and_aggregate(
    n_reps: usize,
    base_seed: u64,
    run: impl Fn(u64) -> Result<SweepResult> + Sync,
) -> Result<SweepResult> {
    if n_reps == 0 {
        return param_err("n_reps must be at least 1");
    }
    let runs = (0..n_reps as u64)
        .into_par_iter()
        .map(|i| run(base_seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&runs)
}
