//! The F3M1 on-disk matrix format.
//!
//! Layout, all little-endian: magic `F3M1`, u64 row count, u32 dimension,
//! u8 precision tag (0 = f64, 1 = f32), three reserved zero bytes, then the
//! row-major coordinate payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"F3M1";

/// Payload element width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageTag {
    F64,
    F32,
}

impl StorageTag {
    fn byte(self) -> u8 {
        match self {
            StorageTag::F64 => 0,
            StorageTag::F32 => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(StorageTag::F64),
            1 => Ok(StorageTag::F32),
            other => Err(Error::Format(format!("unknown precision tag {other}"))),
        }
    }
}

/// Write a matrix in F3M1 format, narrowing the payload when the tag is f32.
pub fn write_matrix(path: &Path, data: ArrayView2<'_, f64>, tag: StorageTag) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&(data.nrows() as u64).to_le_bytes())?;
    w.write_all(&(data.ncols() as u32).to_le_bytes())?;
    w.write_all(&[tag.byte(), 0, 0, 0])?;
    match tag {
        StorageTag::F64 => {
            for v in data.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        StorageTag::F32 => {
            for v in data.iter() {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read an F3M1 matrix; f32 payloads widen to f64 and the original tag is
/// returned alongside.
pub fn read_matrix(path: &Path) -> Result<(Array2<f64>, StorageTag)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            magic, MAGIC
        )));
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let n = u64::from_le_bytes(u64buf);
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let d = u32::from_le_bytes(u32buf);
    let mut tail = [0u8; 4];
    r.read_exact(&mut tail)?;
    let tag = StorageTag::from_byte(tail[0])?;
    if tail[1] != 0 || tail[2] != 0 || tail[3] != 0 {
        return Err(Error::Format("reserved header bytes must be zero".into()));
    }
    let n = usize::try_from(n).map_err(|_| Error::Format("row count overflows usize".into()))?;
    let d = d as usize;
    if d == 0 {
        return Err(Error::Format("dimension must be positive".into()));
    }
    let count = n
        .checked_mul(d)
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let mut data = Vec::with_capacity(count);
    match tag {
        StorageTag::F64 => {
            let mut buf = [0u8; 8];
            for _ in 0..count {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
        }
        StorageTag::F32 => {
            let mut buf = [0u8; 4];
            for _ in 0..count {
                r.read_exact(&mut buf)?;
                data.push(f32::from_le_bytes(buf) as f64);
            }
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let matrix = Array2::from_shape_vec((n, d), data)
        .map_err(|e| Error::Format(format!("shape mismatch: {e}")))?;
    Ok((matrix, tag))
}

/// Weight vectors travel as single-column matrices.
pub fn write_vector(path: &Path, data: &[f64], tag: StorageTag) -> Result<()> {
    let mat = ArrayView2::from_shape((data.len(), 1), data)
        .map_err(|e| Error::InvalidInput(format!("vector shape: {e}")))?;
    write_matrix(path, mat, tag)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let (mat, _) = read_matrix(path)?;
    if mat.ncols() != 1 {
        return Err(Error::Format(format!(
            "expected a single-column vector file, found {} columns",
            mat.ncols()
        )));
    }
    Ok(mat.into_raw_vec_and_offset().0)
}
