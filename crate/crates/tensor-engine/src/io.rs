//! Versioned little-endian tensor bundles.
//!
//! Layout: magic "DRQA", format u32, then one record per tensor:
//! name length u32, UTF-8 name, rank u32, one u32 extent per axis,
//! f32 payload. Records run to end of file.

use crate::error::FormatError;
use crate::tensor::Tensor;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"DRQA";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_bundle<P: AsRef<Path>>(
    path: P,
    entries: &[(&str, &Tensor<f32>)],
) -> Result<(), FormatError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for (name, tensor) in entries {
        let name_bytes = name.as_bytes();
        buf.extend_from_slice(&(name_bytes.len() as u32).to_le_bytes());
        buf.extend_from_slice(name_bytes);
        buf.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for &e in tensor.shape() {
            buf.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_bundle<P: AsRef<Path>>(path: P) -> Result<Vec<(String, Tensor<f32>)>, FormatError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_bundle(&bytes)
}

pub fn parse_bundle(bytes: &[u8]) -> Result<Vec<(String, Tensor<f32>)>, FormatError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let mut out = Vec::new();
    while !cur.at_end() {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| FormatError::BadRecord("name is not UTF-8".into()))?
            .to_owned();
        let rank = cur.u32()? as usize;
        if rank > 8 {
            return Err(FormatError::BadRecord(format!("rank {rank} out of range")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let payload = cur.take(numel.checked_mul(4).ok_or(FormatError::Truncated)?)?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let tensor = Tensor::new(shape, data)
            .map_err(|e| FormatError::BadRecord(format!("{name}: {e}")))?;
        out.push((name, tensor));
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.pos + n > self.bytes.len() {
            return Err(FormatError::Truncated);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
