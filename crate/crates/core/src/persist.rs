//! Binary container shared by checkpoints and manifest caches.
//!
//! Layout: 4 magic bytes, `u16` format version, a sequence of `u32`
//! length-prefixed header fields, raw payload, and a trailing CRC-32 of
//! everything before it. All integers and floats are little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{PersistError, Result};

pub(crate) const CRC_LEN: usize = 4;

#[derive(Debug, Default)]
pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(magic: [u8; 4], version: u16) -> Self {
        let mut buf = Vec::with_capacity(1 << 12);
        buf.extend_from_slice(&magic);
        buf.extend_from_slice(&version.to_le_bytes());
        Self { buf }
    }

    /// Bare encoder for building a field body.
    pub fn body() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u128(&mut self, v: u128) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64s(&mut self, vs: &[f64]) -> &mut Self {
        self.buf.reserve(vs.len() * 8);
        for v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.u32(b.len() as u32);
        self.buf.extend_from_slice(b);
        self
    }

    pub fn field(&mut self, body: Encoder) -> &mut Self {
        self.bytes(&body.buf)
    }

    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.buf.extend_from_slice(&crc.to_le_bytes());
        self.buf
    }
}

#[derive(Debug)]
pub(crate) struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    /// Validates magic, checksum, and version, returning a decoder
    /// positioned at the first header field.
    pub fn open(bytes: &'a [u8], magic: [u8; 4], version: u16) -> Result<Self, PersistError> {
        let min = 4 + 2 + CRC_LEN;
        if bytes.len() < min {
            return Err(PersistError::Truncated {
                offset: 0,
                needed: min,
                available: bytes.len(),
            });
        }
        let found: [u8; 4] = bytes[..4].try_into().expect("length checked");
        if found != magic {
            return Err(PersistError::BadMagic {
                expected: magic,
                found,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - CRC_LEN);
        let stored = u32::from_le_bytes(tail.try_into().expect("length checked"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(PersistError::ChecksumMismatch { stored, computed });
        }
        let found_version = u16::from_le_bytes([body[4], body[5]]);
        if found_version != version {
            return Err(PersistError::VersionMismatch {
                found: found_version,
                supported: version,
            });
        }
        Ok(Self { data: body, pos: 6 })
    }

    fn field_slice(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        if self.data.len() - self.pos < n {
            return Err(PersistError::Truncated {
                offset: self.pos,
                needed: n,
                available: self.data.len() - self.pos,
            });
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, PersistError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("sized")))
    }

    pub fn u64(&mut self) -> Result<u64, PersistError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("sized")))
    }

    pub fn u128(&mut self) -> Result<u128, PersistError> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().expect("sized")))
    }

    pub fn f64(&mut self) -> Result<f64, PersistError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("sized")))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, PersistError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| PersistError::Malformed("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("sized")))
            .collect())
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], PersistError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    /// Next length-prefixed field as its own decoder.
    pub fn field(&mut self) -> Result<Decoder<'a>, PersistError> {
        Ok(Self::field_slice(self.bytes()?))
    }

    pub fn expect_end(&self) -> Result<(), PersistError> {
        if self.pos != self.data.len() {
            return Err(PersistError::Malformed(format!(
                "{} trailing bytes",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp_name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    tmp_name.push(format!(".tmp-{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAGIC: [u8; 4] = *b"TEST";

    fn sample() -> Vec<u8> {
        let mut e = Encoder::new(MAGIC, 3);
        let mut body = Encoder::body();
        body.u32(7).f64(1.5);
        e.field(body);
        e.f64s(&[1.0, -2.0]);
        e.finish()
    }

    #[test]
    fn round_trip() {
        let bytes = sample();
        let mut d = Decoder::open(&bytes, MAGIC, 3).unwrap();
        let mut f = d.field().unwrap();
        assert_eq!(f.u32().unwrap(), 7);
        assert_eq!(f.f64().unwrap(), 1.5);
        f.expect_end().unwrap();
        assert_eq!(d.f64s(2).unwrap(), vec![1.0, -2.0]);
        d.expect_end().unwrap();
    }

    #[test]
    fn distinct_failures() {
        let bytes = sample();
        assert!(matches!(
            Decoder::open(&bytes, *b"NOPE", 3),
            Err(PersistError::BadMagic { .. })
        ));
        assert!(matches!(
            Decoder::open(&bytes, MAGIC, 4),
            Err(PersistError::VersionMismatch { found: 3, supported: 4 })
        ));
        assert!(matches!(
            Decoder::open(&bytes[..bytes.len() - 3], MAGIC, 3),
            Err(PersistError::ChecksumMismatch { .. })
        ));
        assert!(matches!(
            Decoder::open(&bytes[..5], MAGIC, 3),
            Err(PersistError::Truncated { .. })
        ));
        let mut flipped = bytes.clone();
        flipped[12] ^= 1;
        assert!(matches!(
            Decoder::open(&flipped, MAGIC, 3),
            Err(PersistError::ChecksumMismatch { .. })
        ));
    }
}
