//! Trains the desk network on the synthetic corpus under one protocol and
//! reports clear and blurred test accuracy.
//!
//! cargo run --release --example train_desk -- [protocol] [epochs]

use acuity::curriculum::{build_schedule, ProtocolId, ScheduleConfig};
use acuity::dataset::synth::{synth_corpus, SynthConfig};
use acuity::dataset::{DatasetManifest, PrepareConfig};
use acuity::experiments::{evaluate_accuracy, EvalDegradation};
use acuity::nn::{Architecture, HyperParams};
use acuity::train::Trainer;

fn main() -> acuity::Result<()> {
    let mut args = std::env::args().skip(1);
    let protocol: ProtocolId = args.next().unwrap_or_else(|| "LH".into()).parse()?;
    let epochs: f64 = args.next().map_or(Ok(20.0), |s| s.parse()).unwrap_or(20.0);

    let data = DatasetManifest::prepare(&synth_corpus(&SynthConfig::default())?, &PrepareConfig::default())?;
    println!("{} train / {} test images, {} identities", data.train.len(), data.test.len(), data.n_identities);
    let schedule = build_schedule(protocol, &ScheduleConfig { epochs_scale: epochs / 500.0, ..ScheduleConfig::default() })?;
    let mut trainer = Trainer::new(&Architecture::desk(data.n_identities), HyperParams::desk(), schedule, 0)?;
    trainer.run(&data.train, None, |log, _| {
        println!(
            "epoch {:3} phase {} {:<22} loss {:.4} acc {:.3}",
            log.epoch, log.phase, log.policy, log.train_loss, log.train_acc
        );
        Ok(())
    })?;

    let net = trainer.network();
    for deg in [EvalDegradation::None, EvalDegradation::Blur(2.0), EvalDegradation::Blur(4.0)] {
        println!("test accuracy {deg:?}: {:.3}", evaluate_accuracy(net, &data.test, deg)?);
    }
    Ok(())
}
