//! Corpus ingestion, identity filtering, stratified splitting, and batching.

mod manifest;
pub mod synth;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::RngCore;
use rayon::prelude::*;

use crate::error::{data_err, param_err, Error, Result};
use crate::image::{resize_bilinear, GrayImage, NormalizationStats};
use crate::pgm::read_pgm;
use crate::rng::RandomSource;
use crate::tensor::Tensor;

pub use manifest::{manifest_load, manifest_save, MANIFEST_MAGIC, MANIFEST_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub identity: usize,
    pub image: GrayImage,
    pub source: String,
}

/// Outcome of [`ingest_corpus`] besides the records themselves.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    /// Directory name of each identity id, indexed by id.
    pub identity_names: Vec<String>,
    pub failures: Vec<(PathBuf, String)>,
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    out.sort();
    Ok(out)
}

/// Reads `root/<identity>/<image>.pgm`, resizing every image to
/// `target = (height, width)` with bilinear resampling. Luminance is left in
/// `[0, 1]`. Files that fail to decode are listed in the report.
pub fn ingest_corpus(root: &Path, target: (usize, usize)) -> Result<(Vec<ImageRecord>, IngestReport)> {
    if !root.is_dir() {
        return data_err(format!("corpus root {} is not a directory", root.display()));
    }
    let mut jobs: Vec<(String, PathBuf)> = Vec::new();
    for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        for file in sorted_entries(&dir)?.into_iter().filter(|p| p.is_file() && is_pgm(p)) {
            jobs.push((name.clone(), file));
        }
    }
    let decoded: Vec<(String, PathBuf, Result<GrayImage>)> = jobs
        .into_par_iter()
        .map(|(name, path)| {
            let img = read_pgm(&path).and_then(|img| resize_bilinear(&img, target.0, target.1));
            (name, path, img)
        })
        .collect();

    let mut report = IngestReport::default();
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut records = Vec::new();
    for (name, path, img) in decoded {
        match img {
            Ok(image) => {
                let next = ids.len();
                let identity = *ids.entry(name.clone()).or_insert_with(|| {
                    report.identity_names.push(name);
                    next
                });
                records.push(ImageRecord {
                    identity,
                    image,
                    source: path.display().to_string(),
                });
            }
            Err(e) => report.failures.push((path, e.to_string())),
        }
    }
    if records.is_empty() {
        return data_err(format!("no decodable PGM images under {}", root.display()));
    }
    Ok((records, report))
}

fn group_by_identity(records: &[ImageRecord]) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(r.identity).or_default().push(i);
    }
    groups
}

/// Keeps identities with at least `min_count` images, subsamples each to
/// exactly `cap` (seeded), and renumbers the survivors densely.
pub fn filter_and_cap(records: &[ImageRecord], min_count: usize, cap: usize, rng: &mut RandomSource) -> Result<Vec<ImageRecord>> {
    if min_count > cap {
        return param_err(format!("min_count {min_count} exceeds cap {cap}"));
    }
    if cap == 0 {
        return param_err("cap must be positive");
    }
    let mut out = Vec::new();
    let mut next_id = 0;
    for (_, mut members) in group_by_identity(records) {
        if members.len() < min_count {
            continue;
        }
        if members.len() > cap {
            rng.shuffle(&mut members);
            members.truncate(cap);
            members.sort_unstable();
        }
        for i in members {
            out.push(ImageRecord {
                identity: next_id,
                ..records[i].clone()
            });
        }
        next_id += 1;
    }
    if out.is_empty() {
        return data_err(format!("no identity has at least {min_count} images"));
    }
    Ok(out)
}

/// Identities that [`filter_and_cap`] would reject, renumbered densely.
pub fn rejected_identities(records: &[ImageRecord], min_count: usize) -> Vec<ImageRecord> {
    let mut out = Vec::new();
    let mut next_id = 0;
    for (_, members) in group_by_identity(records) {
        if members.len() >= min_count {
            continue;
        }
        out.extend(members.into_iter().map(|i| ImageRecord {
            identity: next_id,
            ..records[i].clone()
        }));
        next_id += 1;
    }
    out
}

/// Stratified split: each identity contributes `round(fraction * n)` images
/// to train (at least one to each side).
pub fn split(records: &[ImageRecord], train_fraction: f64, rng: &mut RandomSource) -> Result<(Vec<ImageRecord>, Vec<ImageRecord>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return param_err(format!("train fraction must be in (0, 1), got {train_fraction}"));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (id, mut members) in group_by_identity(records) {
        let n = members.len();
        if n < 2 {
            return data_err(format!("identity {id} has {n} image(s); cannot split"));
        }
        rng.shuffle(&mut members);
        let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let (a, b) = members.split_at_mut(n_train);
        a.sort_unstable();
        b.sort_unstable();
        train.extend(a.iter().map(|&i| records[i].clone()));
        test.extend(b.iter().map(|&i| records[i].clone()));
    }
    Ok((train, test))
}

pub fn count_identities(records: &[ImageRecord]) -> usize {
    records.iter().map(|r| r.identity + 1).max().unwrap_or(0)
}

/// Filtered, split, and normalized corpus. Normalization statistics come
/// from the train split only and are applied unchanged to the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub train: Vec<ImageRecord>,
    pub test: Vec<ImageRecord>,
    pub n_identities: usize,
    /// Filtering and split settings; `config.seed` is the split seed.
    pub config: PrepareConfig,
    pub normalization: NormalizationStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareConfig {
    pub min_count: usize,
    pub cap: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            min_count: 100,
            cap: 100,
            train_fraction: 0.9,
            seed: 0,
        }
    }
}

impl DatasetManifest {
    /// `records` carry raw `[0, 1]` luminance.
    pub fn prepare(records: &[ImageRecord], config: &PrepareConfig) -> Result<Self> {
        let root = RandomSource::new(config.seed);
        let kept = filter_and_cap(records, config.min_count, config.cap, &mut root.child(0))?;
        let (train, test) = split(&kept, config.train_fraction, &mut root.child(1))?;
        let images: Vec<GrayImage> = train.iter().map(|r| r.image.clone()).collect();
        let normalization = NormalizationStats::compute(&images)?;
        let norm = |rs: Vec<ImageRecord>| -> Vec<ImageRecord> {
            rs.into_iter()
                .map(|r| ImageRecord {
                    image: normalization.apply(&r.image),
                    ..r
                })
                .collect()
        };
        Ok(Self {
            n_identities: count_identities(&kept),
            train: norm(train),
            test: norm(test),
            config: *config,
            normalization,
        })
    }
}

/// Per-image transform applied while batching.
pub trait ImageTransform {
    fn apply(&self, image: &GrayImage, rng: &mut RandomSource) -> Result<GrayImage>;
}

/// Passes images through unchanged without consuming randomness.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTransform;

impl ImageTransform for IdentityTransform {
    fn apply(&self, image: &GrayImage, _rng: &mut RandomSource) -> Result<GrayImage> {
        Ok(image.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `[N, 1, H, W]`.
    pub images: Tensor,
    pub labels: Vec<usize>,
}

/// One epoch of shuffled, transformed batches. The final batch may be short.
pub struct Batches<'a, T: ImageTransform + Sync + ?Sized> {
    records: &'a [ImageRecord],
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
    transform: &'a T,
    rng: &'a mut RandomSource,
}

pub fn make_batches<'a, T: ImageTransform + Sync + ?Sized>(
    records: &'a [ImageRecord],
    batch_size: usize,
    rng: &'a mut RandomSource,
    transform: &'a T,
) -> Result<Batches<'a, T>> {
    if batch_size == 0 {
        return param_err("batch size must be positive");
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    rng.shuffle(&mut order);
    Ok(Batches {
        records,
        order,
        pos: 0,
        batch_size,
        transform,
        rng,
    })
}

impl<T: ImageTransform + Sync + ?Sized> Batches<'_, T> {
    fn assemble(&mut self, idx: &[usize]) -> Result<Batch> {
        let first = &self.records[idx[0]].image;
        let (h, w) = (first.height(), first.width());
        // One seed per image, drawn in order, so results do not depend on
        // how the transforms are scheduled across threads.
        let seeds: Vec<u64> = idx.iter().map(|_| self.rng.next_u64()).collect();
        let records = self.records;
        let transform = self.transform;
        let images: Vec<GrayImage> = idx
            .par_iter()
            .zip(seeds)
            .map(|(&i, seed)| transform.apply(&records[i].image, &mut RandomSource::new(seed)))
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(idx.len() * h * w);
        let mut labels = Vec::with_capacity(idx.len());
        for (&i, img) in idx.iter().zip(&images) {
            let rec = &records[i];
            if img.height() != h || img.width() != w {
                return Err(Error::Shape(format!(
                    "{} is {}x{}, batch expects {h}x{w}",
                    rec.source,
                    img.height(),
                    img.width()
                )));
            }
            data.extend_from_slice(img.pixels());
            labels.push(rec.identity);
        }
        Ok(Batch {
            images: Tensor::from_vec(&[idx.len(), 1, h, w], data)?,
            labels,
        })
    }
}

impl<T: ImageTransform + Sync + ?Sized> Iterator for Batches<'_, T> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let idx = self.order[self.pos..end].to_vec();
        self.pos = end;
        Some(self.assemble(&idx))
    }
}

/// Stacks images into a `[N, 1, H, W]` tensor, applying `f` to each.
pub fn stack_images<'a>(
    images: impl IntoIterator<Item = &'a GrayImage>,
    f: impl Fn(&GrayImage) -> Result<GrayImage>,
) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut dims = None;
    let mut n = 0;
    for img in images {
        let img = f(img)?;
        match dims {
            None => dims = Some((img.height(), img.width())),
            Some(d) if d != (img.height(), img.width()) => {
                return Err(Error::Shape("images in a batch differ in size".into()))
            }
            _ => {}
        }
        data.extend_from_slice(img.pixels());
        n += 1;
    }
    let (h, w) = dims.ok_or_else(|| Error::Data("cannot stack zero images".into()))?;
    Tensor::from_vec(&[n, 1, h, w], data)
}
