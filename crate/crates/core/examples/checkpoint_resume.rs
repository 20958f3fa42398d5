//! Interrupts an LH run at the phase boundary, saves a checkpoint, resumes
//! from disk, and checks the result is bit-identical to an uninterrupted run.
//!
//! cargo run --release --example checkpoint_resume

use acuity::curriculum::{build_schedule, ProtocolId, ScheduleConfig};
use acuity::dataset::synth::{synth_corpus, SynthConfig};
use acuity::dataset::{DatasetManifest, PrepareConfig};
use acuity::experiments::report::content_hash;
use acuity::nn::{checkpoint_load, checkpoint_save, Architecture, HyperParams};
use acuity::train::Trainer;

fn main() -> acuity::Result<()> {
    let corpus = synth_corpus(&SynthConfig { identities: 4, per_identity: 30, ..SynthConfig::default() })?;
    let data = DatasetManifest::prepare(&corpus, &PrepareConfig { min_count: 30, cap: 30, ..PrepareConfig::default() })?;
    let schedule = build_schedule(ProtocolId::Lh, &ScheduleConfig { epochs_scale: 0.016, ..ScheduleConfig::default() })?;
    let arch = Architecture::desk(data.n_identities);
    let hyper = HyperParams::desk();

    let mut full = Trainer::new(&arch, hyper, schedule.clone(), 42)?;
    full.run(&data.train, None, |_, _| Ok(()))?;

    let path = std::env::temp_dir().join("acuity_resume_example.ckpt");
    let mut first = Trainer::new(&arch, hyper, schedule.clone(), 42)?;
    let boundary = schedule.boundaries()[0];
    first.run(&data.train, Some(boundary), |_, _| Ok(()))?;
    checkpoint_save(&first.checkpoint(), &path)?;
    let mut resumed = Trainer::resume(checkpoint_load(&path)?, schedule)?;
    resumed.run(&data.train, None, |_, _| Ok(()))?;

    let a = full.checkpoint().to_bytes();
    let b = resumed.checkpoint().to_bytes();
    println!("uninterrupted {}", content_hash(&a));
    println!("resumed at {boundary:2} {}", content_hash(&b));
    println!("{}", if a == b { "identical" } else { "DIFFERENT" });
    std::fs::remove_file(&path)?;
    Ok(())
}
