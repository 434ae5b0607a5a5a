//! Binary weight snapshots.
//!
//! Layout (all little-endian): four `u32` header words
//! `[magic, version, width, outputs]` followed by the six matrices as `f32`,
//! in order, row-major.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{NetworkWeights, OUTPUT_DIM, PARAM_COUNT, WIDTH};

/// `b"NRCW"` read as a little-endian word.
pub const SNAPSHOT_MAGIC: u32 = u32::from_le_bytes(*b"NRCW");
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:#010x}")]
    Magic(u32),
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("architecture mismatch: width {width}, outputs {outputs}")]
    Shape { width: u32, outputs: u32 },
    #[error("snapshot contains non-finite weights")]
    NonFinite,
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f32s<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub(crate) fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> io::Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)
}

pub fn write_weights<W: Write>(out: &mut W, weights: &NetworkWeights<f32>) -> io::Result<()> {
    for word in [SNAPSHOT_MAGIC, SNAPSHOT_VERSION, WIDTH as u32, OUTPUT_DIM as u32] {
        out.write_all(&word.to_le_bytes())?;
    }
    write_f32s(out, weights.as_slice())
}

pub fn read_weights<R: Read>(input: &mut R) -> Result<NetworkWeights<f32>, SnapshotError> {
    let magic = read_u32(input)?;
    if magic != SNAPSHOT_MAGIC {
        return Err(SnapshotError::Magic(magic));
    }
    let version = read_u32(input)?;
    if version != SNAPSHOT_VERSION {
        return Err(SnapshotError::Version(version));
    }
    let width = read_u32(input)?;
    let outputs = read_u32(input)?;
    if width as usize != WIDTH || outputs as usize != OUTPUT_DIM {
        return Err(SnapshotError::Shape { width, outputs });
    }
    let data = read_f32s(input, PARAM_COUNT)?;
    let w = NetworkWeights::from_flat(data).expect("length checked");
    if !w.is_finite() {
        return Err(SnapshotError::NonFinite);
    }
    Ok(w)
}
