//! Writes a small synthetic corpus as per-identity PGM folders and ingests
//! it back the way a real corpus would be read.
//!
//! cargo run --release --example synth_corpus -- [out_dir]

use std::path::PathBuf;

use acuity::dataset::synth::{write_synth_corpus, SynthConfig};
use acuity::dataset::{ingest_corpus, DatasetManifest, PrepareConfig};

fn main() -> acuity::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synth_faces".into()));
    let cfg = SynthConfig { identities: 6, per_identity: 20, size: 48, seed: 11 };
    let n = write_synth_corpus(&root, &cfg)?;
    println!("wrote {n} images under {}", root.display());

    let (records, report) = ingest_corpus(&root, (32, 32))?;
    println!("ingested {} images of {} identities ({} failures)", records.len(), report.identity_names.len(), report.failures.len());
    let manifest = DatasetManifest::prepare(&records, &PrepareConfig { min_count: 20, cap: 20, ..PrepareConfig::default() })?;
    println!(
        "train {} / test {}, normalization mean {:.4} std {:.4}",
        manifest.train.len(),
        manifest.test.len(),
        manifest.normalization.mean,
        manifest.normalization.std
    );
    Ok(())
}
