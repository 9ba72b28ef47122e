//! On-disk formats: model and data archives, label files and reports.
//!
//! Both archives store tensors as little-endian `f32`, row-major. The layouts
//! are described in `docs/formats.md`.

mod data;
mod labels;
mod model;
mod report;

use thiserror::Error;

pub use data::{decode_data, encode_data, load_data, save_data, DATA_MAGIC, DATA_VERSION};
pub use labels::{parse_labels, read_labels};
pub use model::{
    decode_model, encode_model, load_model, save_model, LayerEntry, Manifest, TensorEntry, MODEL_MAGIC, MODEL_VERSION,
};
pub use report::{write_json, write_records_csv};

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (this build reads {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("archive truncated: {0}")]
    Truncated(String),

    #[error("tensor `{tensor}` at offset {offset} with {length} bytes overflows a blob of {blob} bytes")]
    OffsetOverflow {
        tensor: String,
        offset: u64,
        length: u64,
        blob: u64,
    },

    #[error("tensors do not tile the blob: {0}")]
    Tiling(String),

    #[error("tensor `{tensor}` has shape {shape:?} but {length} bytes")]
    TensorShape {
        tensor: String,
        shape: Vec<usize>,
        length: u64,
    },

    #[error("layer shapes do not compose: {0}")]
    ShapeComposition(String),

    #[error("payload has {found} bytes, header implies {expected}")]
    PayloadLength { expected: u64, found: u64 },

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("labels: {0}")]
    Labels(String),
}

impl ArchiveError {
    /// Stable machine-readable identifier of the failure.
    pub fn code(&self) -> &'static str {
        match self {
            ArchiveError::BadMagic { .. } => "bad_magic",
            ArchiveError::VersionMismatch { .. } => "version_mismatch",
            ArchiveError::Truncated(_) => "truncated",
            ArchiveError::OffsetOverflow { .. } => "offset_overflow",
            ArchiveError::Tiling(_) => "tiling",
            ArchiveError::TensorShape { .. } => "tensor_shape",
            ArchiveError::ShapeComposition(_) => "shape_composition",
            ArchiveError::PayloadLength { .. } => "payload_length",
            ArchiveError::Manifest(_) => "manifest",
            ArchiveError::Labels(_) => "labels",
        }
    }
}

/// Little-endian reader over a byte slice that reports truncation.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ArchiveError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            ArchiveError::Truncated(format!(
                "need {n} bytes for {what} at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<(), ArchiveError> {
        let found: [u8; 4] = self.take(4, "magic")?.try_into().expect("4 bytes");
        if found != expected {
            return Err(ArchiveError::BadMagic { expected, found });
        }
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32, ArchiveError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64, ArchiveError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}

fn check_version(found: u32, supported: u32) -> Result<(), ArchiveError> {
    if found != supported {
        return Err(ArchiveError::VersionMismatch { found, supported });
    }
    Ok(())
}

fn f32s_from_le(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect()
}

fn extend_le(out: &mut Vec<u8>, values: impl IntoIterator<Item = f32>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}
