//! Training protocols as epoch-indexed transform policies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::ImageTransform;
use crate::error::{param_err, Error, Result};
use crate::image::{blur, random_flip_rotate, shrink_and_center, GrayImage};
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolId {
    /// Blurred first half, clear second half.
    #[serde(rename = "LH")]
    Lh,
    #[serde(rename = "HH")]
    Hh,
    #[serde(rename = "HL")]
    Hl,
    #[serde(rename = "LL")]
    Ll,
    /// Every image blurred with probability 0.5, whole run.
    #[serde(rename = "MIXED")]
    Mixed,
    /// Blurred prefix of half length, then a full-length mixed run.
    #[serde(rename = "PRETRAIN_MIXED")]
    PretrainMixed,
    #[serde(rename = "MIXED_ONLY")]
    MixedOnly,
    /// Blurred first half, then shrink-and-center with probability 0.5.
    #[serde(rename = "SHRINK_LIA")]
    ShrinkLia,
    #[serde(rename = "SHRINK_HIA")]
    ShrinkHia,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 9] = [
        ProtocolId::Lh,
        ProtocolId::Hh,
        ProtocolId::Hl,
        ProtocolId::Ll,
        ProtocolId::Mixed,
        ProtocolId::PretrainMixed,
        ProtocolId::MixedOnly,
        ProtocolId::ShrinkLia,
        ProtocolId::ShrinkHia,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolId::Lh => "LH",
            ProtocolId::Hh => "HH",
            ProtocolId::Hl => "HL",
            ProtocolId::Ll => "LL",
            ProtocolId::Mixed => "MIXED",
            ProtocolId::PretrainMixed => "PRETRAIN_MIXED",
            ProtocolId::MixedOnly => "MIXED_ONLY",
            ProtocolId::ShrinkLia => "SHRINK_LIA",
            ProtocolId::ShrinkHia => "SHRINK_HIA",
        }
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        ProtocolId::ALL
            .into_iter()
            .find(|p| p.as_str() == norm)
            .ok_or_else(|| Error::Param(format!("unknown protocol {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Degradation {
    Clear,
    Blur { sigma: f64 },
    Shrink { factor: f64 },
    /// Blur with probability `p`, otherwise clear.
    MixedBlur { sigma: f64, p: f64 },
    /// Shrink with probability `p` by a factor drawn uniformly from `factors`.
    CoinShrink { p: f64, factors: Vec<f64> },
}

impl Degradation {
    pub fn validate(&self) -> Result<()> {
        let sigma_ok = |s: f64| s.is_finite() && s >= 0.0;
        let factor_ok = |f: f64| f > 0.0 && f <= 1.0;
        let p_ok = |p: f64| (0.0..=1.0).contains(&p);
        let ok = match self {
            Degradation::Clear => true,
            Degradation::Blur { sigma } => sigma_ok(*sigma),
            Degradation::Shrink { factor } => factor_ok(*factor),
            Degradation::MixedBlur { sigma, p } => sigma_ok(*sigma) && p_ok(*p),
            Degradation::CoinShrink { p, factors } => {
                p_ok(*p) && !factors.is_empty() && factors.iter().all(|&f| factor_ok(f))
            }
        };
        if ok {
            Ok(())
        } else {
            param_err(format!("invalid degradation {self:?}"))
        }
    }

    pub fn label(&self) -> String {
        match self {
            Degradation::Clear => "clear".into(),
            Degradation::Blur { sigma } => format!("blur({sigma})"),
            Degradation::Shrink { factor } => format!("shrink({factor})"),
            Degradation::MixedBlur { sigma, p } => format!("mixed_blur({sigma},p={p})"),
            Degradation::CoinShrink { p, factors } => format!("coin_shrink(p={p},{factors:?})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformPolicy {
    pub mode: Degradation,
    /// Random horizontal flip plus rotation up to `max_angle_deg`.
    pub augment: bool,
    pub max_angle_deg: f64,
}

impl TransformPolicy {
    pub fn clear() -> Self {
        Self {
            mode: Degradation::Clear,
            augment: false,
            max_angle_deg: 0.0,
        }
    }
}

/// Augments (if enabled) and then degrades one image.
///
/// The number of random draws does not depend on the mode: augmentation
/// takes two, then a coin and a pick are always drawn. Protocols whose
/// degradations are no-ops therefore yield identical streams.
pub fn apply_policy(policy: &TransformPolicy, image: &GrayImage, rng: &mut RandomSource) -> Result<GrayImage> {
    let posed = if policy.augment {
        random_flip_rotate(image, rng, policy.max_angle_deg)?
    } else {
        image.clone()
    };
    let coin = rng.uniform();
    let pick = rng.uniform();
    match &policy.mode {
        Degradation::Clear => Ok(posed),
        Degradation::Blur { sigma } => blur(&posed, *sigma),
        Degradation::Shrink { factor } => shrink_and_center(&posed, *factor),
        Degradation::MixedBlur { sigma, p } => {
            if coin < *p {
                blur(&posed, *sigma)
            } else {
                Ok(posed)
            }
        }
        Degradation::CoinShrink { p, factors } => {
            if coin < *p {
                let i = ((pick * factors.len() as f64) as usize).min(factors.len() - 1);
                shrink_and_center(&posed, factors[i])
            } else {
                Ok(posed)
            }
        }
    }
}

impl ImageTransform for TransformPolicy {
    fn apply(&self, image: &GrayImage, rng: &mut RandomSource) -> Result<GrayImage> {
        apply_policy(self, image, rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub policy: TransformPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSchedule {
    pub protocol: ProtocolId,
    pub phases: Vec<Phase>,
    pub total_epochs: usize,
}

/// Evaluation shrink ladder without the no-shrink factor 1.
pub const DEFAULT_TRAIN_FACTORS: [f64; 6] = [0.9, 0.8, 0.4, 0.2, 0.14, 0.12];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    /// Multiplies the 500-epoch base run.
    pub epochs_scale: f64,
    pub sigma: f64,
    pub factors: Vec<f64>,
    /// Probability of the degraded branch in mixed and coin-shrink phases.
    pub mix_p: f64,
    pub augment: bool,
    pub max_angle_deg: f64,
    /// Shortens the mixed phase of PRETRAIN_MIXED so its total matches the
    /// other protocols.
    pub equalize: bool,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            epochs_scale: 1.0,
            sigma: 4.0,
            factors: DEFAULT_TRAIN_FACTORS.to_vec(),
            mix_p: 0.5,
            augment: true,
            max_angle_deg: 25.0,
            equalize: false,
        }
    }
}

const BASE_EPOCHS: f64 = 500.0;

pub fn build_schedule(protocol: ProtocolId, config: &ScheduleConfig) -> Result<ProtocolSchedule> {
    if !(config.epochs_scale > 0.0 && config.epochs_scale.is_finite()) {
        return param_err(format!("epochs scale must be positive, got {}", config.epochs_scale));
    }
    let total = (BASE_EPOCHS * config.epochs_scale).round() as usize;
    let half = (BASE_EPOCHS / 2.0 * config.epochs_scale + 1e-9).floor() as usize;
    if total < 2 || half == 0 {
        return param_err(format!(
            "epochs scale {} leaves fewer than one epoch per phase",
            config.epochs_scale
        ));
    }

    let policy = |mode: Degradation| -> Result<TransformPolicy> {
        mode.validate()?;
        Ok(TransformPolicy {
            mode,
            augment: config.augment,
            max_angle_deg: config.max_angle_deg,
        })
    };
    let clear = policy(Degradation::Clear)?;
    let blurred = policy(Degradation::Blur { sigma: config.sigma })?;
    let mixed = policy(Degradation::MixedBlur {
        sigma: config.sigma,
        p: config.mix_p,
    })?;
    let coin = policy(Degradation::CoinShrink {
        p: config.mix_p,
        factors: config.factors.clone(),
    })?;

    let phase = |start, end, policy: &TransformPolicy| Phase {
        start,
        end,
        policy: policy.clone(),
    };
    let phases = match protocol {
        ProtocolId::Lh => vec![phase(0, half, &blurred), phase(half, total, &clear)],
        ProtocolId::Hl => vec![phase(0, half, &clear), phase(half, total, &blurred)],
        ProtocolId::Hh => vec![phase(0, total, &clear)],
        ProtocolId::Ll => vec![phase(0, total, &blurred)],
        ProtocolId::Mixed | ProtocolId::MixedOnly => vec![phase(0, total, &mixed)],
        ProtocolId::PretrainMixed => {
            let end = if config.equalize { total } else { half + total };
            vec![phase(0, half, &blurred), phase(half, end, &mixed)]
        }
        ProtocolId::ShrinkLia => vec![phase(0, half, &blurred), phase(half, total, &coin)],
        ProtocolId::ShrinkHia => vec![phase(0, total, &coin)],
    };
    let total_epochs = phases.last().map_or(0, |p| p.end);
    Ok(ProtocolSchedule {
        protocol,
        phases,
        total_epochs,
    })
}

impl ProtocolSchedule {
    /// Index of the phase covering `epoch`.
    pub fn phase_index(&self, epoch: usize) -> Result<usize> {
        self.phases
            .iter()
            .position(|p| (p.start..p.end).contains(&epoch))
            .ok_or_else(|| {
                Error::Param(format!(
                    "epoch {epoch} outside schedule of {} epochs",
                    self.total_epochs
                ))
            })
    }

    /// Epochs at which a new phase begins, excluding 0.
    pub fn boundaries(&self) -> Vec<usize> {
        self.phases.iter().skip(1).map(|p| p.start).collect()
    }
}

pub fn policy_for_epoch(schedule: &ProtocolSchedule, epoch: usize) -> Result<&TransformPolicy> {
    Ok(&schedule.phases[schedule.phase_index(epoch)?].policy)
}
