//! First-layer receptive-field extents before and after training with and
//! without an initial blur phase.
//!
//! cargo run --release --example receptive_fields -- [epochs]

use acuity::curriculum::{build_schedule, ProtocolId, ScheduleConfig};
use acuity::dataset::synth::{synth_corpus, SynthConfig};
use acuity::dataset::{DatasetManifest, PrepareConfig};
use acuity::experiments::{network_rf_report, RfReport};
use acuity::nn::{Architecture, HyperParams};
use acuity::train::Trainer;

fn show(label: &str, r: &RfReport) {
    let s = &r.summary;
    println!(
        "{label:<10} mean {:.3}  q1 {:.3}  median {:.3}  q3 {:.3}  range [{:.3}, {:.3}]",
        s.mean, s.q1, s.median, s.q3, s.min, s.max
    );
}

fn main() -> acuity::Result<()> {
    let epochs: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let data = DatasetManifest::prepare(&synth_corpus(&SynthConfig::default())?, &PrepareConfig::default())?;
    let cfg = ScheduleConfig { epochs_scale: epochs / 500.0, ..ScheduleConfig::default() };
    let arch = Architecture::desk(data.n_identities);

    let mut shown_init = false;
    for protocol in [ProtocolId::Hh, ProtocolId::Ll] {
        let mut t = Trainer::new(&arch, HyperParams::desk(), build_schedule(protocol, &cfg)?, 0)?;
        if !shown_init {
            show("init", &network_rf_report(t.network())?);
            shown_init = true;
        }
        t.run(&data.train, None, |_, _| Ok(()))?;
        show(protocol.as_str(), &network_rf_report(t.network())?);
    }
    Ok(())
}
