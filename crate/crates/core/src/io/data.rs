use std::path::Path;

use ndarray::Array2;

use super::{check_version, extend_le, f32s_from_le, ArchiveError, Cursor};
use crate::error::{Error, Result};
use crate::network::DataBatch;

pub const DATA_MAGIC: [u8; 4] = *b"NNQD";
pub const DATA_VERSION: u32 = 1;

/// Header `NNQD | version u32 | m u32 | rank u32 | dims u32 × rank`, then
/// `m × prod(dims)` little-endian `f32`, sample-major.
pub fn encode_data(batch: &DataBatch) -> Vec<u8> {
    let shape = batch.shape();
    let mut out = Vec::with_capacity(16 + 4 * shape.len() + 4 * batch.data().len());
    out.extend_from_slice(&DATA_MAGIC);
    out.extend_from_slice(&DATA_VERSION.to_le_bytes());
    out.extend_from_slice(&(batch.samples() as u32).to_le_bytes());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    extend_le(&mut out, batch.data().iter().copied());
    out
}

pub fn decode_data(bytes: &[u8]) -> Result<DataBatch> {
    let mut c = Cursor::new(bytes);
    c.magic(DATA_MAGIC)?;
    check_version(c.u32("version")?, DATA_VERSION)?;
    let m = c.u32("sample count")? as usize;
    let rank = c.u32("rank")? as usize;
    let shape = (0..rank)
        .map(|_| c.u32("shape").map(|d| d as usize))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let numel = shape.iter().try_fold(1u64, |a, &d| a.checked_mul(d as u64));
    let expected = numel
        .and_then(|n| n.checked_mul(m as u64))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| ArchiveError::Manifest(format!("data shape {shape:?} × {m} overflows")))?;
    let payload = c.rest();
    if payload.len() as u64 != expected {
        return Err(ArchiveError::PayloadLength {
            expected,
            found: payload.len() as u64,
        }
        .into());
    }
    let cols = (expected / 4).checked_div(m as u64).unwrap_or(0) as usize;
    let data = Array2::from_shape_vec((m, cols), f32s_from_le(payload))
        .map_err(|e| Error::Shape(e.to_string()))?;
    DataBatch::new(shape, data)
}

pub fn save_data(path: impl AsRef<Path>, batch: &DataBatch) -> Result<()> {
    std::fs::write(path, encode_data(batch))?;
    Ok(())
}

pub fn load_data(path: impl AsRef<Path>) -> Result<DataBatch> {
    decode_data(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch() -> DataBatch {
        let data = Array2::from_shape_fn((3, 12), |(i, j)| (i as f32 - 1.5) * 0.1 + j as f32 * 1e-3);
        DataBatch::new(vec![2, 2, 3], data).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let b = batch();
        let bytes = encode_data(&b);
        assert_eq!(bytes.len(), 4 + 4 + 4 + 4 + 12 + 3 * 12 * 4);
        let back = decode_data(&bytes).unwrap();
        assert_eq!(back.shape(), b.shape());
        assert!(back.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn corruption_is_reported() {
        let bytes = encode_data(&batch());
        let code = |r: Result<DataBatch>| match r {
            Err(Error::Archive(e)) => e.code(),
            other => panic!("expected archive error, got {other:?}"),
        };
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(code(decode_data(&bad)), "bad_magic");
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert_eq!(code(decode_data(&bad)), "version_mismatch");
        assert_eq!(code(decode_data(&bytes[..bytes.len() - 1])), "payload_length");
        assert_eq!(code(decode_data(&bytes[..10])), "truncated");
    }
}
