//! Manifest cache files: the prepared (filtered, split, normalized) corpus.
//!
//! Same container as checkpoints with magic `ACUM`. Header fields hold the
//! prepare config, identity count, normalization stats, and the per-record
//! table (split, identity, height, width, source path); the payload is every
//! image's pixels in table order.

use std::path::Path;

use crate::dataset::{DatasetManifest, ImageRecord, PrepareConfig};
use crate::error::{PersistError, Result};
use crate::image::{GrayImage, NormalizationStats};
use crate::persist::{write_atomic, Decoder, Encoder};

pub const MANIFEST_MAGIC: [u8; 4] = *b"ACUM";
pub const MANIFEST_VERSION: u16 = 1;

fn to_bytes(m: &DatasetManifest) -> Vec<u8> {
    let mut e = Encoder::new(MANIFEST_MAGIC, MANIFEST_VERSION);

    let mut f = Encoder::body();
    f.u64(m.config.min_count as u64)
        .u64(m.config.cap as u64)
        .f64(m.config.train_fraction)
        .u64(m.config.seed)
        .u64(m.n_identities as u64)
        .f64(m.normalization.mean)
        .f64(m.normalization.std);
    e.field(f);

    let all = || m.train.iter().map(|r| (0u8, r)).chain(m.test.iter().map(|r| (1u8, r)));
    let mut f = Encoder::body();
    f.u64((m.train.len() + m.test.len()) as u64);
    for (part, r) in all() {
        f.u8(part)
            .u64(r.identity as u64)
            .u32(r.image.height() as u32)
            .u32(r.image.width() as u32)
            .bytes(r.source.as_bytes());
    }
    e.field(f);

    for (_, r) in all() {
        e.f64s(r.image.pixels());
    }
    e.finish()
}

struct Row {
    part: u8,
    identity: usize,
    height: usize,
    width: usize,
    source: String,
}

fn from_bytes(bytes: &[u8]) -> Result<DatasetManifest> {
    let mut d = Decoder::open(bytes, MANIFEST_MAGIC, MANIFEST_VERSION)?;

    let mut f = d.field()?;
    let config = PrepareConfig {
        min_count: f.u64()? as usize,
        cap: f.u64()? as usize,
        train_fraction: f.f64()?,
        seed: f.u64()?,
    };
    let n_identities = f.u64()? as usize;
    let normalization = NormalizationStats {
        mean: f.f64()?,
        std: f.f64()?,
    };
    f.expect_end()?;

    let mut f = d.field()?;
    let n = f.u64()? as usize;
    let mut rows = Vec::new();
    for _ in 0..n {
        let part = f.u8()?;
        let identity = f.u64()? as usize;
        let height = f.u32()? as usize;
        let width = f.u32()? as usize;
        let source = String::from_utf8(f.bytes()?.to_vec())
            .map_err(|_| PersistError::Malformed("source path is not UTF-8".into()))?;
        if part > 1 || identity >= n_identities {
            return Err(PersistError::Malformed(format!("bad record row ({part}, {identity})")).into());
        }
        rows.push(Row { part, identity, height, width, source });
    }
    f.expect_end()?;

    let mut train = Vec::new();
    let mut test = Vec::new();
    for row in rows {
        let pixels = d.f64s(row.height * row.width)?;
        let rec = ImageRecord {
            identity: row.identity,
            image: GrayImage::new(row.height, row.width, pixels)?,
            source: row.source,
        };
        if row.part == 0 { train.push(rec) } else { test.push(rec) }
    }
    d.expect_end()?;
    Ok(DatasetManifest {
        train,
        test,
        n_identities,
        config,
        normalization,
    })
}

pub fn manifest_save(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(manifest))
}

pub fn manifest_load(path: &Path) -> Result<DatasetManifest> {
    from_bytes(&std::fs::read(path)?)
}
