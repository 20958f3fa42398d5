//! Binary PGM (`P5`) reading and writing.
//!
//! Samples are one byte when `maxval < 256`, otherwise two bytes big-endian.
//! Decoded luminance is `sample / maxval`, in `[0, 1]`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::GrayImage;

fn format_err<T>(path: &Path, reason: impl Into<String>) -> Result<T> {
    Err(Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    })
}

struct Header {
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return format_err(path, "missing P5 magic");
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for slot in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return format_err(path, "expected a decimal header field");
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                reason: "header number out of range".into(),
            })?;
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return format_err(path, "missing whitespace after maxval"),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return format_err(path, "zero image dimension");
    }
    if maxval == 0 || maxval > 65535 {
        return format_err(path, format!("maxval {maxval} outside 1..=65535"));
    }
    Ok(Header {
        width: width as usize,
        height: height as usize,
        maxval,
        data_start: pos,
    })
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let h = parse_header(bytes, path)?;
    let n = h.width * h.height;
    let wide = h.maxval > 255;
    let needed = n * if wide { 2 } else { 1 };
    let raster = &bytes[h.data_start..];
    if raster.len() < needed {
        return format_err(path, format!("raster has {} bytes, expected {needed}", raster.len()));
    }
    let scale = h.maxval as f64;
    let pixels: Vec<f64> = if wide {
        raster[..needed]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
            .collect()
    } else {
        raster[..needed].iter().map(|&b| b as f64 / scale).collect()
    };
    if pixels.iter().any(|&p| p > 1.0) {
        return format_err(path, "sample exceeds maxval");
    }
    GrayImage::new(h.height, h.width, pixels)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path)?;
    decode_pgm(&bytes, path)
}

/// Encodes with `maxval = 255`, clamping luminance to `[0, 1]` and rounding.
pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(
        image
            .pixels()
            .iter()
            .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    crate::persist::write_atomic(path, &encode_pgm(image))
}
