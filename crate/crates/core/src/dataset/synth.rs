//! Seeded synthetic face corpus.
//!
//! Each identity is a fixed set of facial parameters (head ellipse, hairline,
//! eyes, brows, nose, mouth, shading). Every image of that identity re-renders
//! the face with small pose, scale, expression, and lighting jitter plus pixel
//! noise. Faces are left-right symmetric so horizontal flips keep identity.

use std::path::Path;

use crate::dataset::ImageRecord;
use crate::error::{param_err, Result};
use crate::image::GrayImage;
use crate::pgm::write_pgm;
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub identities: usize,
    pub per_identity: usize,
    /// Square side in pixels.
    pub size: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            identities: 10,
            per_identity: 100,
            size: 32,
            seed: 0,
        }
    }
}

/// Face geometry in normalized coordinates: the canvas spans `[-1, 1]`.
#[derive(Debug, Clone, Copy)]
struct FaceParams {
    background: f64,
    head_w: f64,
    head_h: f64,
    skin: f64,
    hairline: f64,
    hair: f64,
    eye_dx: f64,
    eye_y: f64,
    eye_r: f64,
    eye_dark: f64,
    brow_gap: f64,
    brow_w: f64,
    brow_dark: f64,
    nose_len: f64,
    nose_w: f64,
    mouth_y: f64,
    mouth_w: f64,
    mouth_h: f64,
    mouth_dark: f64,
    cheek: f64,
}

impl FaceParams {
    fn draw(rng: &mut RandomSource) -> Self {
        let mut u = |lo, hi| rng.uniform_range(lo, hi);
        Self {
            background: u(0.1, 0.9),
            head_w: u(0.5, 0.8),
            head_h: u(0.7, 0.95),
            skin: u(0.45, 0.85),
            hairline: u(-0.75, -0.35),
            hair: u(0.0, 0.35),
            eye_dx: u(0.18, 0.42),
            eye_y: u(-0.3, 0.0),
            eye_r: u(0.07, 0.15),
            eye_dark: u(0.0, 0.3),
            brow_gap: u(0.08, 0.22),
            brow_w: u(0.1, 0.25),
            brow_dark: u(0.05, 0.45),
            nose_len: u(0.12, 0.35),
            nose_w: u(0.04, 0.12),
            mouth_y: u(0.35, 0.6),
            mouth_w: u(0.15, 0.45),
            mouth_h: u(0.03, 0.1),
            mouth_dark: u(0.05, 0.4),
            cheek: u(-0.15, 0.15),
        }
    }
}

/// Per-image nuisance variation.
#[derive(Debug, Clone, Copy)]
struct Jitter {
    dx: f64,
    dy: f64,
    scale: f64,
    angle: f64,
    smile: f64,
    light: f64,
    light_dir: f64,
    noise: f64,
}

impl Jitter {
    fn draw(rng: &mut RandomSource) -> Self {
        Self {
            dx: rng.uniform_range(-0.08, 0.08),
            dy: rng.uniform_range(-0.08, 0.08),
            scale: rng.uniform_range(0.92, 1.08),
            angle: rng.uniform_range(-0.12, 0.12),
            smile: rng.uniform_range(0.85, 1.2),
            light: rng.uniform_range(0.0, 0.12),
            light_dir: rng.uniform_range(0.0, std::f64::consts::TAU),
            noise: 0.03,
        }
    }
}

/// Soft membership: 1 inside (`d < 0`), 0 outside, linear across `edge`.
fn inside(d: f64, edge: f64) -> f64 {
    (0.5 - d / edge).clamp(0.0, 1.0)
}

/// Signed distance-like value of an axis-aligned ellipse, in units of the
/// smaller semi-axis.
fn ellipse(x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> f64 {
    let q = ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2);
    (q.sqrt() - 1.0) * rx.min(ry)
}

fn shade(face: &FaceParams, jit: &Jitter, px: f64, py: f64, edge: f64) -> f64 {
    // undo pose: canvas -> face frame
    let (s, c) = jit.angle.sin_cos();
    let (tx, ty) = (px - jit.dx, py - jit.dy);
    let x = (c * tx + s * ty) / jit.scale;
    let y = (-s * tx + c * ty) / jit.scale;
    let ax = x.abs();

    let mut v = face.background;
    let head = inside(ellipse(x, y, 0.0, 0.0, face.head_w, face.head_h), edge);
    let cheek = face.skin + face.cheek * (ax / face.head_w).powi(2);
    v += head * (cheek - v);
    let hair = head * inside(y - face.hairline, edge);
    v += hair * (face.hair - v);

    let eye = inside(ellipse(ax, y, face.eye_dx, face.eye_y, face.eye_r, face.eye_r * 0.7), edge);
    v += eye * (face.eye_dark - v);
    let brow_y = face.eye_y - face.eye_r * 0.7 - face.brow_gap;
    let brow = inside(ellipse(ax, y, face.eye_dx, brow_y, face.brow_w, 0.04), edge);
    v += brow * (face.brow_dark - v);

    let nose_top = face.eye_y + 0.05;
    let nose_t = ((y - nose_top) / face.nose_len).clamp(0.0, 1.0);
    let in_nose = inside(y - (nose_top + face.nose_len), edge) * inside(nose_top - y, edge);
    let nose = in_nose * inside(ax - face.nose_w * nose_t, edge);
    v += nose * (face.skin * 0.6 - v);

    let mouth = inside(
        ellipse(x, y, 0.0, face.mouth_y, face.mouth_w * jit.smile, face.mouth_h),
        edge,
    );
    v += mouth * (face.mouth_dark - v);

    v + jit.light * (x * jit.light_dir.cos() + y * jit.light_dir.sin())
}

fn render(face: &FaceParams, jit: &Jitter, size: usize, rng: &mut RandomSource) -> Result<GrayImage> {
    let edge = 2.0 / size as f64;
    let mut pixels = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let py = (r as f64 + 0.5) * edge - 1.0;
            let px = (c as f64 + 0.5) * edge - 1.0;
            let v = shade(face, jit, px, py, edge) + rng.normal(0.0, jit.noise);
            pixels.push(v.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(size, size, pixels)
}

/// Renders the corpus in memory. Identity `i` images are drawn from
/// `child(i)` of the seed, so adding identities leaves existing ones intact.
pub fn synth_corpus(config: &SynthConfig) -> Result<Vec<ImageRecord>> {
    if config.identities == 0 || config.per_identity == 0 || config.size < 4 {
        return param_err(format!("degenerate synthetic corpus config {config:?}"));
    }
    let root = RandomSource::new(config.seed);
    let mut out = Vec::with_capacity(config.identities * config.per_identity);
    for id in 0..config.identities {
        let mut rng = root.child(id as u64);
        let face = FaceParams::draw(&mut rng);
        for k in 0..config.per_identity {
            let jit = Jitter::draw(&mut rng);
            out.push(ImageRecord {
                identity: id,
                image: render(&face, &jit, config.size, &mut rng)?,
                source: format!("synth/id{id:04}/{k:04}.pgm"),
            });
        }
    }
    Ok(out)
}

/// Writes the corpus as `root/id####/####.pgm`, 8-bit.
pub fn write_synth_corpus(root: &Path, config: &SynthConfig) -> Result<usize> {
    let records = synth_corpus(config)?;
    for r in &records {
        let rel = r.source.strip_prefix("synth/").unwrap_or(&r.source);
        write_pgm(&root.join(rel), &r.image)?;
    }
    Ok(records.len())
}
