//! Little-endian binary primitives shared by the checkpoint and the
//! windowed-dataset cache.

use crate::error::{Error, Result};
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"GNTM";
pub const KIND_CHECKPOINT: u8 = 1;
pub const KIND_WINDOW_CACHE: u8 = 2;

pub fn write_u16<W: Write>(w: &mut W, v: u16) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(Into::into)
}

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(Into::into)
}

pub fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(Into::into)
}

pub fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(Into::into)
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("unexpected end of file (truncated?)".into()))?;
    Ok(buf)
}

pub fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    Ok(read_exact::<R, 1>(r)?[0])
}

pub fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    Ok(u16::from_le_bytes(read_exact(r)?))
}

pub fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(r)?))
}

pub fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact(r)?))
}

pub fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact(r)?))
}

pub fn write_header<W: Write>(w: &mut W, kind: u8, version: u16) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[kind])?;
    write_u16(w, version)
}

pub fn read_header<R: Read>(r: &mut R, expect_kind: u8, expect_version: u16) -> Result<()> {
    let magic: [u8; 4] = read_exact(r)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic bytes {magic:?}, expected {MAGIC:?}"
        )));
    }
    let kind = read_u8(r)?;
    if kind != expect_kind {
        return Err(Error::Format(format!(
            "wrong file kind {kind}, expected {expect_kind}"
        )));
    }
    let version = read_u16(r)?;
    if version != expect_version {
        return Err(Error::Format(format!(
            "unsupported format version {version}, expected {expect_version}"
        )));
    }
    Ok(())
}

pub fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    write_u16(w, bytes.len() as u16)?;
    w.write_all(bytes).map_err(Into::into)
}

pub fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u16(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("unexpected end of file in string".into()))?;
    String::from_utf8(buf).map_err(|_| Error::Format("invalid UTF-8 in string".into()))
}

/// FNV-1a over a byte stream; used as the per-tensor payload checksum.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
