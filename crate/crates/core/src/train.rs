//! Curriculum training loop.
//!
//! Randomness is split by purpose off the run seed: stream 0 initializes the
//! network, stream 1 feeds one child per epoch for shuffling and transforms,
//! and stream 2 drives dropout. Only the dropout position needs to be saved;
//! the epoch streams are recomputed from `(seed, epoch)`, so a run resumed
//! from a checkpoint continues bit-exactly.

use serde::{Deserialize, Serialize};

use crate::curriculum::{policy_for_epoch, ProtocolSchedule};
use crate::dataset::{make_batches, ImageRecord};
use crate::error::{data_err, param_err, Error, Result};
use crate::nn::{softmax_cross_entropy, sgd_momentum_step, Architecture, Checkpoint, HyperParams, NetworkState};
use crate::rng::RandomSource;

const INIT_STREAM: u64 = 0;
const DATA_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub phase: usize,
    pub policy: String,
    pub train_loss: f64,
    /// Running accuracy of the train-mode forward passes during the epoch.
    pub train_acc: f64,
}

pub struct Trainer {
    network: NetworkState,
    hyper: HyperParams,
    schedule: ProtocolSchedule,
    seed: u64,
    dropout_rng: RandomSource,
}

/// Network initialization for run `seed`; identical across protocols.
pub fn init_network(arch: &Architecture, seed: u64) -> Result<NetworkState> {
    NetworkState::from_architecture(arch, &mut RandomSource::new(seed).child(INIT_STREAM))
}

impl Trainer {
    pub fn new(arch: &Architecture, hyper: HyperParams, schedule: ProtocolSchedule, seed: u64) -> Result<Self> {
        hyper.validate()?;
        Ok(Self {
            network: init_network(arch, seed)?,
            hyper,
            schedule,
            seed,
            dropout_rng: RandomSource::new(seed).child(DROPOUT_STREAM),
        })
    }

    /// Resumes from a checkpoint written by [`Trainer::checkpoint`]. The
    /// schedule is not stored in checkpoints and must be supplied again.
    pub fn resume(checkpoint: Checkpoint, schedule: ProtocolSchedule) -> Result<Self> {
        checkpoint.hyper.validate()?;
        if checkpoint.network.epoch as usize > schedule.total_epochs {
            return Err(Error::State(format!(
                "checkpoint is at epoch {} but the schedule has {}",
                checkpoint.network.epoch, schedule.total_epochs
            )));
        }
        Ok(Self {
            seed: checkpoint.rng.seed,
            dropout_rng: RandomSource::from_state(checkpoint.rng),
            network: checkpoint.network,
            hyper: checkpoint.hyper,
            schedule,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            network: self.network.clone(),
            hyper: self.hyper,
            rng: self.dropout_rng.state(),
        }
    }

    pub fn network(&self) -> &NetworkState {
        &self.network
    }

    pub fn into_network(self) -> NetworkState {
        self.network
    }

    pub fn schedule(&self) -> &ProtocolSchedule {
        &self.schedule
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Next epoch to run.
    pub fn epoch(&self) -> usize {
        self.network.epoch as usize
    }

    pub fn is_finished(&self) -> bool {
        self.epoch() >= self.schedule.total_epochs
    }

    pub fn run_epoch(&mut self, train: &[ImageRecord]) -> Result<EpochLog> {
        if train.is_empty() {
            return data_err("empty training set");
        }
        let k = self.network.n_classes();
        if let Some(r) = train.iter().find(|r| r.identity >= k) {
            return data_err(format!("label {} from {} exceeds {k} classes", r.identity, r.source));
        }
        let epoch = self.epoch();
        let phase = self.schedule.phase_index(epoch)?;
        let policy = policy_for_epoch(&self.schedule, epoch)?.clone();
        let mut data_rng = RandomSource::new(self.seed).child(DATA_STREAM).child(epoch as u64);

        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in make_batches(train, self.hyper.batch_size, &mut data_rng, &policy)? {
            let batch = batch?;
            let n = batch.labels.len();
            let (logits, trace) = self.network.forward_train(&batch.images, &mut self.dropout_rng)?;
            let (loss, d_logits) = softmax_cross_entropy(&logits, &batch.labels)?;
            if !loss.is_finite() {
                return Err(Error::State(format!("loss diverged at epoch {epoch}")));
            }
            let grads = self.network.backward(&trace, &d_logits)?;
            sgd_momentum_step(&mut self.network, &grads, &self.hyper)?;
            loss_sum += loss * n as f64;
            correct += logits
                .argmax_axis(1)?
                .iter()
                .zip(&batch.labels)
                .filter(|(p, l)| p == l)
                .count();
        }
        self.network.epoch += 1;
        Ok(EpochLog {
            epoch,
            phase,
            policy: policy.mode.label(),
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
        })
    }

    /// Runs epochs until `stop_at` (exclusive, defaulting to the schedule's
    /// end). `after_epoch` sees each log entry with the trainer state after
    /// that epoch, e.g. to write checkpoints.
    pub fn run(
        &mut self,
        train: &[ImageRecord],
        stop_at: Option<usize>,
        mut after_epoch: impl FnMut(&EpochLog, &Trainer) -> Result<()>,
    ) -> Result<Vec<EpochLog>> {
        let end = stop_at.unwrap_or(self.schedule.total_epochs);
        if end > self.schedule.total_epochs {
            return param_err(format!("stop epoch {end} beyond schedule of {}", self.schedule.total_epochs));
        }
        let mut logs = Vec::new();
        while self.epoch() < end {
            let log = self.run_epoch(train)?;
            after_epoch(&log, self)?;
            logs.push(log);
        }
        Ok(logs)
    }
}
