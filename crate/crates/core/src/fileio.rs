//! Binary container shared by weight and dataset files.
//!
//! Layout: `ARES1` magic, version u16 LE, kind byte, kind-specific header,
//! then named tensor records (name, dims, little-endian f64 payload).

use crate::error::{AresError, Result};
use crate::tensor::Tensor;
use std::io::{Read, Write};

pub const MAGIC: &[u8; 5] = b"ARES1";
pub const VERSION: u16 = 1;

pub const KIND_WEIGHTS: u8 = 0;
pub const KIND_DATASET: u8 = 1;

pub fn write_header(w: &mut impl Write, kind: u8) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[kind])?;
    Ok(())
}

/// Checks magic and version, returns the kind byte.
pub fn read_header(r: &mut impl Read) -> Result<u8> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| AresError::Truncated("header".into()))?;
    if &magic != MAGIC {
        return Err(AresError::BadMagic);
    }
    let version = read_u16(r, "version")?;
    if version != VERSION {
        return Err(AresError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    read_u8(r, "kind")
}

pub fn write_u8(w: &mut impl Write, v: u8) -> Result<()> {
    Ok(w.write_all(&[v])?)
}

pub fn write_u16(w: &mut impl Write, v: u16) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

pub fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

pub fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

pub fn read_u8(r: &mut impl Read, what: &str) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)
        .map_err(|_| AresError::Truncated(what.into()))?;
    Ok(b[0])
}

pub fn read_u16(r: &mut impl Read, what: &str) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)
        .map_err(|_| AresError::Truncated(what.into()))?;
    Ok(u16::from_le_bytes(b))
}

pub fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| AresError::Truncated(what.into()))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| AresError::Truncated(what.into()))?;
    Ok(u64::from_le_bytes(b))
}

pub fn write_tensor_record(w: &mut impl Write, name: &str, tensor: &Tensor) -> Result<()> {
    let bytes = name.as_bytes();
    write_u16(w, bytes.len() as u16)?;
    w.write_all(bytes)?;
    write_u8(w, tensor.shape().len() as u8)?;
    for &d in tensor.shape() {
        write_u32(w, d as u32)?;
    }
    for &v in tensor.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor_record(r: &mut impl Read) -> Result<(String, Tensor)> {
    let name_len = read_u16(r, "tensor name length")? as usize;
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name)
        .map_err(|_| AresError::Truncated("tensor name".into()))?;
    let name = String::from_utf8(name)
        .map_err(|_| AresError::InvalidArgument("tensor name is not UTF-8".into()))?;
    let ndim = read_u8(r, "tensor rank")? as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(read_u32(r, "tensor dim")? as usize);
    }
    let len: usize = shape.iter().product();
    let mut data = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)
            .map_err(|_| AresError::Truncated(format!("tensor '{name}' payload")))?;
        data.push(f64::from_le_bytes(buf));
    }
    Ok((name, Tensor::from_vec(&shape, data)?))
}
