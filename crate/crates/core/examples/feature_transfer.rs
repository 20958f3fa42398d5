//! Linear-probe transfer: trains on ten synthetic identities, then fits a
//! linear SVM on hidden-layer features of ten unseen identities.
//!
//! cargo run --release --example feature_transfer -- [epochs]

use acuity::curriculum::{build_schedule, ProtocolId, ScheduleConfig};
use acuity::dataset::synth::{synth_corpus, SynthConfig};
use acuity::dataset::{DatasetManifest, ImageRecord, PrepareConfig};
use acuity::experiments::{transfer_eval, SvmConfig};
use acuity::nn::{Architecture, HyperParams};
use acuity::train::Trainer;

fn main() -> acuity::Result<()> {
    let epochs: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    // identities 0..10 train the network; 10..20 are the transfer task
    let all = synth_corpus(&SynthConfig { identities: 20, per_identity: 40, ..SynthConfig::default() })?;
    let (source, target): (Vec<ImageRecord>, Vec<ImageRecord>) = all.into_iter().partition(|r| r.identity < 10);
    let target: Vec<ImageRecord> = target.into_iter().map(|r| ImageRecord { identity: r.identity - 10, ..r }).collect();
    let prep = PrepareConfig { min_count: 40, cap: 40, ..PrepareConfig::default() };
    let source = DatasetManifest::prepare(&source, &prep)?;
    let target = DatasetManifest::prepare(&target, &prep)?;

    let cfg = ScheduleConfig { epochs_scale: epochs / 500.0, ..ScheduleConfig::default() };
    let mut t = Trainer::new(
        &Architecture::desk(source.n_identities),
        HyperParams::desk(),
        build_schedule(ProtocolId::Hh, &cfg)?,
        0,
    )?;
    t.run(&source.train, None, |_, _| Ok(()))?;

    let points = transfer_eval(t.network(), &[2, 5, 11, 12, 13], &target.train, &target.test, &SvmConfig::default(), 0)?;
    println!("layer   dim  train_acc  test_acc");
    for p in points {
        println!("{:5} {:5}  {:9.3}  {:8.3}", p.layer, p.dim, p.train_acc, p.test_acc);
    }
    Ok(())
}
