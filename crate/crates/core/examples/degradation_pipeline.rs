//! Renders one synthetic face under the blur and shrink ladders and writes
//! the results as PGM files.
//!
//! cargo run --release --example degradation_pipeline -- [out_dir]

use std::path::PathBuf;

use acuity::dataset::synth::{synth_corpus, SynthConfig};
use acuity::experiments::{DEFAULT_FACTORS, DEFAULT_SIGMAS};
use acuity::image::{blur, random_flip_rotate, shrink_and_center};
use acuity::pgm::write_pgm;
use acuity::rng::RandomSource;

fn main() -> acuity::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "degradations".into()));
    let cfg = SynthConfig { identities: 1, per_identity: 1, size: 64, seed: 3 };
    let face = synth_corpus(&cfg)?.remove(0).image;
    write_pgm(&out.join("original.pgm"), &face)?;

    for sigma in DEFAULT_SIGMAS {
        let img = blur(&face, sigma)?;
        println!("blur  sigma={sigma:<4} variance {:.5}", img.variance());
        write_pgm(&out.join(format!("blur_{sigma}.pgm")), &img)?;
    }
    for factor in DEFAULT_FACTORS {
        let img = shrink_and_center(&face, factor)?;
        println!("shrink factor={factor:<4} mean {:.4}", img.mean());
        write_pgm(&out.join(format!("shrink_{factor}.pgm")), &img)?;
    }
    let mut rng = RandomSource::new(0);
    for i in 0..4 {
        write_pgm(&out.join(format!("augment_{i}.pgm")), &random_flip_rotate(&face, &mut rng, 25.0)?)?;
    }
    println!("wrote images to {}", out.display());
    Ok(())
}
