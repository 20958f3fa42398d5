//! Prints the phase table of every protocol.
//!
//! cargo run --example curriculum_schedules -- [epochs_scale]

use acuity::curriculum::{build_schedule, ProtocolId, ScheduleConfig};

fn main() -> acuity::Result<()> {
    let scale: f64 = std::env::args().nth(1).map_or(Ok(1.0), |s| s.parse()).unwrap_or(1.0);
    for equalize in [false, true] {
        let cfg = ScheduleConfig { epochs_scale: scale, equalize, ..ScheduleConfig::default() };
        println!("epochs_scale {scale}, equalize {equalize}");
        for p in ProtocolId::ALL {
            let s = build_schedule(p, &cfg)?;
            let phases: Vec<String> = s
                .phases
                .iter()
                .map(|ph| format!("{}-{} {}", ph.start, ph.end - 1, ph.policy.mode.label()))
                .collect();
            println!("  {:<15} {:>4} epochs  {}", p.as_str(), s.total_epochs, phases.join(" | "));
        }
    }
    Ok(())
}
