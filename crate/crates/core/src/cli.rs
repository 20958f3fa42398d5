//! Experiment orchestration behind the `acur` binary.
//!
//! Configuration is a flat list of `key=value` settings: first from an
//! optional config file, then from command-line flags, later settings
//! winning. [`RunConfig::resolve`] turns the list into a validated config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curriculum::{build_schedule, ProtocolId, ScheduleConfig, DEFAULT_TRAIN_FACTORS};
use crate::dataset::synth::{synth_corpus, write_synth_corpus, SynthConfig};
use crate::dataset::{
    count_identities, ingest_corpus, manifest_load, manifest_save, rejected_identities, DatasetManifest, ImageRecord,
    PrepareConfig,
};
use crate::error::{data_err, param_err, Error, Result};
use crate::experiments::report::{
    content_hash, write_json, write_sweep_csv, write_training_log, write_transfer_csv, RunRecord,
};
use crate::experiments::{
    aggregate, network_rf_report, sweep, transfer_eval, AxisKind, RfReport, SvmConfig, SweepResult, TransferPoint,
};
use crate::nn::{checkpoint_load, checkpoint_save, Architecture, HyperParams, NetworkState, Scale};
use crate::train::{EpochLog, Trainer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub protocol: ProtocolId,
    pub scale: Scale,
    pub epochs_scale: f64,
    pub sigma: f64,
    /// Shrink factors drawn by coin-shrink training phases.
    pub factors: Vec<f64>,
    pub equalize: bool,
    pub augment: bool,
    pub max_angle: f64,
    pub seed: u64,
    /// Seed of identity capping and the train/test split, shared by all reps.
    pub split_seed: u64,
    pub n_reps: usize,
    /// Corpus root; `None` uses the synthetic generator.
    pub data_root: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub hyper: HyperParams,
    pub min_count: usize,
    pub cap: usize,
    pub train_fraction: f64,
    pub synth_identities: usize,
    pub synth_per_identity: usize,
    pub synth_seed: u64,
    pub svm: SvmConfig,
    pub axis: AxisKind,
    /// Sweep parameters; `None` uses the axis defaults.
    pub sweep_params: Option<Vec<f64>>,
    pub layers: Vec<usize>,
    pub checkpoints: Vec<PathBuf>,
    /// Transfer onto identities excluded by filtering instead of `data_root`
    /// as a separate task.
    pub unseen: bool,
}

impl RunConfig {
    pub fn defaults(scale: Scale) -> Self {
        let desk = scale == Scale::Desk;
        Self {
            protocol: ProtocolId::Hh,
            scale,
            epochs_scale: if desk { 0.04 } else { 1.0 },
            sigma: 4.0,
            factors: DEFAULT_TRAIN_FACTORS.to_vec(),
            equalize: false,
            augment: true,
            max_angle: 25.0,
            seed: 0,
            split_seed: 0,
            n_reps: 1,
            data_root: None,
            output_dir: PathBuf::from("runs"),
            hyper: HyperParams::for_scale(scale),
            min_count: 100,
            cap: 100,
            train_fraction: 0.9,
            synth_identities: 10,
            synth_per_identity: 100,
            synth_seed: 0,
            svm: SvmConfig::default(),
            axis: AxisKind::BlurSigma,
            sweep_params: None,
            layers: Vec::new(),
            checkpoints: Vec::new(),
            unseen: false,
        }
    }

    /// Applies settings in order on top of the defaults for the last `scale`
    /// setting (desk if none).
    pub fn resolve(settings: &[(String, String)]) -> Result<Self> {
        let scale = settings
            .iter()
            .rev()
            .find(|(k, _)| normalize_key(k) == "scale")
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(Scale::Desk);
        let mut cfg = Self::defaults(scale);
        for (k, v) in settings {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match normalize_key(key).as_str() {
            "protocol" => self.protocol = v.parse()?,
            "scale" => self.scale = v.parse()?,
            "epochs_scale" => self.epochs_scale = num(key, v)?,
            "sigma" => self.sigma = num(key, v)?,
            "factors" => self.factors = list(key, v)?,
            "equalize" => self.equalize = flag(key, v)?,
            "augment" => self.augment = flag(key, v)?,
            "max_angle" => self.max_angle = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "split_seed" => self.split_seed = num(key, v)?,
            "reps" | "n_reps" => self.n_reps = num(key, v)?,
            "data" | "data_root" => {
                self.data_root = match v {
                    "" | "synth" | "synthetic" => None,
                    path => Some(PathBuf::from(path)),
                }
            }
            "out" | "output_dir" => self.output_dir = PathBuf::from(v),
            "lr" | "learning_rate" => self.hyper.learning_rate = num(key, v)?,
            "momentum" => self.hyper.momentum = num(key, v)?,
            "batch_size" => self.hyper.batch_size = num(key, v)?,
            "min_count" => self.min_count = num(key, v)?,
            "cap" => self.cap = num(key, v)?,
            "train_fraction" => self.train_fraction = num(key, v)?,
            "synth_identities" => self.synth_identities = num(key, v)?,
            "synth_per_identity" => self.synth_per_identity = num(key, v)?,
            "synth_seed" => self.synth_seed = num(key, v)?,
            "svm_lambda" => self.svm.lambda = num(key, v)?,
            "svm_epochs" => self.svm.epochs = num(key, v)?,
            "svm_lr" => self.svm.lr = num(key, v)?,
            "axis" => self.axis = v.parse()?,
            "params" | "sweep_params" => self.sweep_params = Some(list(key, v)?),
            "layers" => self.layers = list(key, v)?,
            "checkpoint" | "checkpoints" => {
                self.checkpoints = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect()
            }
            "unseen" => self.unseen = flag(key, v)?,
            other => return param_err(format!("unknown setting {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.n_reps == 0 {
            return param_err("reps must be at least 1");
        }
        if let Some(root) = &self.data_root {
            if !root.is_dir() {
                return param_err(format!("data root {} does not exist", root.display()));
            }
        }
        for c in &self.checkpoints {
            if !c.exists() {
                return param_err(format!("checkpoint {} does not exist", c.display()));
            }
        }
        self.schedule_config().factors.iter().try_for_each(|&f| {
            if f > 0.0 && f <= 1.0 {
                Ok(())
            } else {
                param_err(format!("shrink factor {f} outside (0, 1]"))
            }
        })
    }

    pub fn schedule_config(&self) -> ScheduleConfig {
        ScheduleConfig {
            epochs_scale: self.epochs_scale,
            sigma: self.sigma,
            factors: self.factors.clone(),
            mix_p: 0.5,
            augment: self.augment,
            max_angle_deg: self.max_angle,
            equalize: self.equalize,
        }
    }

    pub fn prepare_config(&self) -> PrepareConfig {
        PrepareConfig {
            min_count: self.min_count,
            cap: self.cap,
            train_fraction: self.train_fraction,
            seed: self.split_seed,
        }
    }

    /// Input side length of the configured architecture.
    pub fn image_size(&self) -> (usize, usize) {
        let [_, h, w] = Architecture::for_scale(self.scale, 2).input;
        (h, w)
    }

    pub fn architecture(&self, n_classes: usize) -> Architecture {
        Architecture::for_scale(self.scale, n_classes)
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            identities: self.synth_identities,
            per_identity: self.synth_per_identity,
            size: self.image_size().0,
            seed: self.synth_seed,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

fn normalize_key(k: &str) -> String {
    k.trim().trim_start_matches("--").replace('-', "_").to_ascii_lowercase()
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Param(format!("invalid value {v:?} for {key}")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => param_err(format!("invalid boolean {v:?} for {key}")),
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Param(format!("config line {}: expected key=value, got {raw:?}", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Sets worker parallelism from `ACUR_THREADS` when present. Returns the
/// configured count, or `None` when the variable is unset.
pub fn init_threads() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var("ACUR_THREADS") else {
        return Ok(None);
    };
    let n: usize = num("ACUR_THREADS", &raw)?;
    if n == 0 {
        return param_err("ACUR_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    Ok(Some(n))
}

const MANIFEST_CACHE: &str = "manifest.acum";

/// Loads (or prepares and caches) the corpus for `cfg`.
pub fn load_manifest(cfg: &RunConfig) -> Result<DatasetManifest> {
    let (h, w) = cfg.image_size();
    let prepare = cfg.prepare_config();
    let Some(root) = &cfg.data_root else {
        return DatasetManifest::prepare(&synth_corpus(&cfg.synth_config())?, &prepare);
    };
    let cache = cfg.output_dir.join(MANIFEST_CACHE);
    if let Ok(m) = manifest_load(&cache) {
        let dims_match = m.train.first().is_some_and(|r| r.image.height() == h && r.image.width() == w);
        if m.config == prepare && dims_match {
            return Ok(m);
        }
    }
    let (records, report) = ingest_corpus(root, (h, w))?;
    for (path, reason) in &report.failures {
        eprintln!("skipped {}: {reason}", path.display());
    }
    let manifest = DatasetManifest::prepare(&records, &prepare)?;
    manifest_save(&manifest, &cache)?;
    Ok(manifest)
}

fn check_compatible(net: &NetworkState, manifest: &DatasetManifest, path: &Path) -> Result<()> {
    if net.n_classes() != manifest.n_identities {
        return data_err(format!(
            "{} classifies {} classes but the corpus has {} identities",
            path.display(),
            net.n_classes(),
            manifest.n_identities
        ));
    }
    let [_, h, w] = net.input_shape();
    if let Some(r) = manifest.test.first() {
        if (r.image.height(), r.image.width()) != (h, w) {
            return data_err(format!(
                "{} expects {h}x{w} input but corpus images are {}x{}",
                path.display(),
                r.image.height(),
                r.image.width()
            ));
        }
    }
    Ok(())
}

fn file_hash(path: &Path) -> Result<(String, String)> {
    Ok((path.display().to_string(), content_hash(&std::fs::read(path)?)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Final checkpoint of each repetition.
    pub checkpoints: Vec<PathBuf>,
    pub logs: Vec<Vec<EpochLog>>,
}

fn read_log(path: &Path) -> Result<Vec<EpochLog>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Trains `n_reps` networks (seeds `seed + i`). With one rep, artifacts go to
/// the output directory; otherwise to `rep<i>/` inside it. A single
/// `checkpoint` resumes that run.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    if cfg.checkpoints.len() > 1 || (!cfg.checkpoints.is_empty() && cfg.n_reps > 1) {
        return param_err("resuming takes exactly one checkpoint and one rep");
    }
    let manifest = load_manifest(cfg)?;
    let schedule = build_schedule(cfg.protocol, &cfg.schedule_config())?;
    let mut outcome = TrainOutcome {
        checkpoints: Vec::new(),
        logs: Vec::new(),
    };
    for rep in 0..cfg.n_reps {
        let seed = cfg.seed.wrapping_add(rep as u64);
        let dir = if cfg.n_reps == 1 {
            cfg.output_dir.clone()
        } else {
            cfg.output_dir.join(format!("rep{rep}"))
        };
        let log_path = dir.join("log.csv");
        let (mut trainer, mut logs) = match cfg.checkpoints.first() {
            Some(path) => {
                let cp = checkpoint_load(path)?;
                check_compatible(&cp.network, &manifest, path)?;
                let start = cp.network.epoch as usize;
                let earlier = if log_path.exists() { read_log(&log_path)? } else { Vec::new() };
                let kept = earlier.into_iter().filter(|l| l.epoch < start).collect();
                (Trainer::resume(cp, schedule.clone())?, kept)
            }
            None => {
                let arch = cfg.architecture(manifest.n_identities);
                (Trainer::new(&arch, cfg.hyper, schedule.clone(), seed)?, Vec::new())
            }
        };
        let boundaries = schedule.boundaries();
        let mut written = Vec::new();
        let new_logs = trainer.run(&manifest.train, None, |log, t| {
            eprintln!(
                "[{} rep {rep}] epoch {}/{} {} loss {:.4} acc {:.3}",
                cfg.protocol,
                log.epoch + 1,
                schedule.total_epochs,
                log.policy,
                log.train_loss,
                log.train_acc
            );
            if boundaries.contains(&t.epoch()) {
                let path = dir.join(format!("phase{}_epoch{}.ckpt", log.phase, t.epoch()));
                checkpoint_save(&t.checkpoint(), &path)?;
                written.push(path);
            }
            Ok(())
        })?;
        logs.extend(new_logs);
        let final_path = dir.join("final.ckpt");
        checkpoint_save(&trainer.checkpoint(), &final_path)?;
        written.push(final_path.clone());
        write_training_log(&log_path, &logs)?;

        let mut hashes = cfg.checkpoints.iter().map(|p| file_hash(p)).collect::<Result<Vec<_>>>()?;
        hashes.extend(written.iter().map(|p| file_hash(p)).collect::<Result<Vec<_>>>()?);
        let record = RunRecord {
            command: "train".into(),
            config: cfg.to_json(),
            seeds: vec![trainer.seed(), cfg.split_seed],
            checkpoints: hashes,
            outputs: vec![log_path.display().to_string()],
        };
        write_json(&dir.join("run.json"), &record)?;
        outcome.checkpoints.push(final_path);
        outcome.logs.push(logs);
    }
    Ok(outcome)
}

/// Checkpoints named in the config. A directory stands for its `final.ckpt`
/// or, failing that, every `rep*/final.ckpt` inside it.
pub fn resolve_checkpoints(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in &cfg.checkpoints {
        if !p.is_dir() {
            out.push(p.clone());
            continue;
        }
        let direct = p.join("final.ckpt");
        if direct.is_file() {
            out.push(direct);
            continue;
        }
        let mut reps: Vec<PathBuf> = std::fs::read_dir(p)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|d| d.file_name().is_some_and(|n| n.to_string_lossy().starts_with("rep")))
            .map(|d| d.join("final.ckpt"))
            .filter(|f| f.is_file())
            .collect();
        reps.sort();
        if reps.is_empty() {
            return param_err(format!("no checkpoints found under {}", p.display()));
        }
        out.extend(reps);
    }
    if out.is_empty() {
        return param_err("no checkpoint given (use --checkpoint)");
    }
    Ok(out)
}

/// Protocol recorded in the `run.json` beside a checkpoint, if any.
fn trained_protocol(checkpoint: &Path) -> Option<String> {
    let text = std::fs::read_to_string(checkpoint.parent()?.join("run.json")).ok()?;
    let record: RunRecord = serde_json::from_str(&text).ok()?;
    record.config.get("protocol")?.as_str().map(str::to_string)
}

/// Sweeps the test split for every checkpoint and aggregates them as
/// repetitions. Writes `sweep_<axis>.csv` and `sweep_<axis>.json`. Rows are
/// labeled with the protocol the checkpoints were trained under when their
/// run records agree, else with the configured protocol.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    let paths = resolve_checkpoints(cfg)?;
    let manifest = load_manifest(cfg)?;
    let params = cfg.sweep_params.clone().unwrap_or_else(|| cfg.axis.default_params());
    let mut runs = Vec::new();
    for path in &paths {
        let net = checkpoint_load(path)?.network;
        check_compatible(&net, &manifest, path)?;
        runs.push(sweep(&net, &manifest.test, cfg.axis, &params)?);
    }
    let result = aggregate(&runs)?;
    let label = paths
        .iter()
        .map(|p| trained_protocol(p))
        .reduce(|a, b| if a == b { a } else { None })
        .flatten()
        .unwrap_or_else(|| cfg.protocol.as_str().to_string());
    let stem = format!("sweep_{}", cfg.axis.as_str());
    let csv_path = cfg.output_dir.join(format!("{stem}.csv"));
    write_sweep_csv(&csv_path, &label, &result)?;
    let record = RunRecord {
        command: "sweep".into(),
        config: cfg.to_json(),
        seeds: vec![cfg.split_seed],
        checkpoints: paths.iter().map(|p| file_hash(p)).collect::<Result<_>>()?,
        outputs: vec![csv_path.display().to_string()],
    };
    write_json(&cfg.output_dir.join(format!("{stem}.json")), &record)?;
    Ok(result)
}

/// Unseen identities for transfer: identities the filter rejected from the
/// configured corpus, or for the synthetic corpus, additional identities
/// beyond the training ones.
fn unseen_records(cfg: &RunConfig, n_source: usize) -> Result<Vec<ImageRecord>> {
    match &cfg.data_root {
        Some(root) => {
            let (records, _) = ingest_corpus(root, cfg.image_size())?;
            Ok(rejected_identities(&records, cfg.min_count))
        }
        None => {
            let extra = SynthConfig {
                identities: n_source + cfg.synth_identities,
                ..cfg.synth_config()
            };
            Ok(synth_corpus(&extra)?
                .into_iter()
                .filter(|r| r.identity >= n_source)
                .map(|r| ImageRecord {
                    identity: r.identity - n_source,
                    ..r
                })
                .collect())
        }
    }
}

/// Linear-probe transfer from the first checkpoint onto a target corpus:
/// `data_root` as a separate task, or unseen identities with `unseen`.
pub fn cmd_transfer(cfg: &RunConfig) -> Result<Vec<TransferPoint>> {
    if cfg.layers.is_empty() {
        return param_err("transfer needs --layers (comma-separated layer indices)");
    }
    let path = resolve_checkpoints(cfg)?.remove(0);
    let net = checkpoint_load(&path)?.network;
    let records = match &cfg.data_root {
        Some(root) if !cfg.unseen => ingest_corpus(root, cfg.image_size())?.0,
        _ => unseen_records(cfg, net.n_classes())?,
    };
    if count_identities(&records) < 2 {
        return data_err("transfer target needs at least two identities");
    }
    let prepare = PrepareConfig {
        min_count: 2,
        cap: usize::MAX,
        train_fraction: cfg.train_fraction,
        seed: cfg.split_seed,
    };
    let target = DatasetManifest::prepare(&records, &prepare)?;
    let points = transfer_eval(&net, &cfg.layers, &target.train, &target.test, &cfg.svm, cfg.seed)?;
    let csv_path = cfg.output_dir.join("transfer.csv");
    write_transfer_csv(&csv_path, &points)?;
    let record = RunRecord {
        command: "transfer".into(),
        config: cfg.to_json(),
        seeds: vec![cfg.seed, cfg.split_seed],
        checkpoints: vec![file_hash(&path)?],
        outputs: vec![csv_path.display().to_string()],
    };
    write_json(&cfg.output_dir.join("transfer.json"), &record)?;
    Ok(points)
}

/// First-layer receptive-field report of the first checkpoint, written to
/// `rf.json`.
pub fn cmd_rf(cfg: &RunConfig) -> Result<RfReport> {
    let path = resolve_checkpoints(cfg)?.remove(0);
    let report = network_rf_report(&checkpoint_load(&path)?.network)?;
    write_json(&cfg.output_dir.join("rf.json"), &report)?;
    Ok(report)
}

/// Writes the synthetic corpus as PGM files under the output directory.
pub fn cmd_synth_data(cfg: &RunConfig) -> Result<usize> {
    write_synth_corpus(&cfg.output_dir, &cfg.synth_config())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
        items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn later_settings_win() {
        let text = "protocol = LH\nsigma=2 # comment\n\n# only a comment\n";
        let mut s = parse_config_text(text).unwrap();
        s.extend(pairs(&[("--sigma", "3"), ("factors", "0.5, 0.25")]));
        let cfg = RunConfig::resolve(&s).unwrap();
        assert_eq!(cfg.protocol, ProtocolId::Lh);
        assert_eq!(cfg.sigma, 3.0);
        assert_eq!(cfg.factors, vec![0.5, 0.25]);
        assert_eq!(cfg.hyper, HyperParams::desk());
    }

    #[test]
    fn scale_selects_defaults() {
        let cfg = RunConfig::resolve(&pairs(&[("lr", "0.5"), ("scale", "full")])).unwrap();
        assert_eq!(cfg.hyper.learning_rate, 0.5);
        assert_eq!(cfg.hyper.batch_size, 128);
        assert_eq!(cfg.epochs_scale, 1.0);
        assert_eq!(cfg.image_size(), (100, 100));
    }

    #[test]
    fn bad_settings() {
        assert!(RunConfig::resolve(&pairs(&[("nope", "1")])).is_err());
        assert!(RunConfig::resolve(&pairs(&[("sigma", "x")])).is_err());
        assert!(RunConfig::resolve(&pairs(&[("factors", "0.5,1.5")])).is_err());
        assert!(RunConfig::resolve(&pairs(&[("data", "/definitely/missing")])).is_err());
        assert!(parse_config_text("just words").is_err());
    }
}
