//! Trains a few protocols with repeated seeds and compares their blur-sweep
//! curves and AUCs.
//!
//! cargo run --release --example protocol_sweep -- [epochs] [reps]

use acuity::curriculum::{build_schedule, ProtocolId, ScheduleConfig};
use acuity::dataset::synth::{synth_corpus, SynthConfig};
use acuity::dataset::{DatasetManifest, PrepareConfig};
use acuity::experiments::{blur_sweep, repeat_and_aggregate, DEFAULT_SIGMAS};
use acuity::nn::{Architecture, HyperParams};
use acuity::train::Trainer;

fn main() -> acuity::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let reps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let data = DatasetManifest::prepare(&synth_corpus(&SynthConfig::default())?, &PrepareConfig::default())?;
    let cfg = ScheduleConfig { epochs_scale: epochs / 500.0, ..ScheduleConfig::default() };

    for protocol in [ProtocolId::Hh, ProtocolId::Lh, ProtocolId::Mixed] {
        let schedule = build_schedule(protocol, &cfg)?;
        let result = repeat_and_aggregate(reps, 0, |seed| {
            let mut t = Trainer::new(&Architecture::desk(data.n_identities), HyperParams::desk(), schedule.clone(), seed)?;
            t.run(&data.train, None, |_, _| Ok(()))?;
            blur_sweep(t.network(), &data.test, &DEFAULT_SIGMAS)
        })?;
        let curve: Vec<String> = result.points.iter().map(|p| format!("{:.2}±{:.2}", p.mean, p.ste)).collect();
        println!("{:<6} auc {:.3}  [{}]", protocol.as_str(), result.auc, curve.join(" "));
    }
    Ok(())
}
