use std::path::Path;

use ndarray::{Array1, Array2, Array4};
use serde::{Deserialize, Serialize};

use super::{check_version, extend_le, f32s_from_le, ArchiveError, Cursor};
use crate::error::{Error, Result};
use crate::network::{Activation, LayerSpec, NetworkModel, Padding};

pub const MODEL_MAGIC: [u8; 4] = *b"NNQM";
pub const MODEL_VERSION: u32 = 1;

/// Location of one tensor in the blob. `offset` and `length` are in bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub shape: Vec<usize>,
    pub offset: u64,
    pub length: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerEntry {
    Dense {
        weights: TensorEntry,
        bias: TensorEntry,
    },
    Conv2d {
        kernel: TensorEntry,
        bias: TensorEntry,
        stride: usize,
        padding: Padding,
    },
    #[serde(rename = "batchnorm")]
    BatchNorm {
        scale: TensorEntry,
        shift: TensorEntry,
    },
    Activation {
        activation: Activation,
    },
    #[serde(rename = "maxpool")]
    MaxPool {
        window: usize,
        stride: usize,
    },
    Dropout {
        rate: f32,
    },
}

impl LayerEntry {
    fn tensors(&self) -> Vec<(&'static str, &TensorEntry)> {
        match self {
            LayerEntry::Dense { weights, bias } => vec![("weights", weights), ("bias", bias)],
            LayerEntry::Conv2d { kernel, bias, .. } => vec![("kernel", kernel), ("bias", bias)],
            LayerEntry::BatchNorm { scale, shift } => vec![("scale", scale), ("shift", shift)],
            _ => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerEntry>,
}

struct BlobWriter {
    blob: Vec<u8>,
}

impl BlobWriter {
    fn put<'a>(&mut self, shape: &[usize], values: impl IntoIterator<Item = &'a f32>) -> TensorEntry {
        let offset = self.blob.len() as u64;
        extend_le(&mut self.blob, values.into_iter().copied());
        TensorEntry {
            shape: shape.to_vec(),
            offset,
            length: self.blob.len() as u64 - offset,
        }
    }
}

/// `NNQM | version u32 | manifest length u64 | manifest JSON | blob`.
pub fn encode_model(model: &NetworkModel) -> Vec<u8> {
    let mut w = BlobWriter { blob: Vec::new() };
    let layers = model
        .layers
        .iter()
        .map(|layer| match layer {
            // `iter()` on a standard-layout array walks it in row-major order.
            LayerSpec::Dense { weights, bias } => LayerEntry::Dense {
                weights: w.put(weights.shape(), weights.iter()),
                bias: w.put(bias.shape(), bias.iter()),
            },
            LayerSpec::Conv2d {
                kernel,
                bias,
                stride,
                padding,
            } => LayerEntry::Conv2d {
                kernel: w.put(kernel.shape(), kernel.iter()),
                bias: w.put(bias.shape(), bias.iter()),
                stride: *stride,
                padding: *padding,
            },
            LayerSpec::BatchNorm { scale, shift } => LayerEntry::BatchNorm {
                scale: w.put(scale.shape(), scale.iter()),
                shift: w.put(shift.shape(), shift.iter()),
            },
            LayerSpec::Activation(a) => LayerEntry::Activation { activation: *a },
            LayerSpec::MaxPool { window, stride } => LayerEntry::MaxPool {
                window: *window,
                stride: *stride,
            },
            LayerSpec::Dropout { rate } => LayerEntry::Dropout { rate: *rate },
        })
        .collect();
    let manifest = Manifest {
        name: model.name.clone(),
        input_shape: model.input_shape.clone(),
        layers,
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(16 + json.len() + w.blob.len());
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&w.blob);
    out
}

/// Checks every tensor entry against the blob: element counts match byte
/// lengths, no entry runs past the end, and entries tile the blob in
/// manifest order with no gap or overlap.
fn validate_manifest(manifest: &Manifest, blob_len: u64) -> std::result::Result<(), ArchiveError> {
    let mut cursor = 0u64;
    for (i, layer) in manifest.layers.iter().enumerate() {
        for (field, t) in layer.tensors() {
            let name = format!("layers[{i}].{field}");
            let end = t.offset.checked_add(t.length);
            if end.is_none_or(|e| e > blob_len) {
                return Err(ArchiveError::OffsetOverflow {
                    tensor: name,
                    offset: t.offset,
                    length: t.length,
                    blob: blob_len,
                });
            }
            let numel = t.shape.iter().try_fold(1u64, |a, &d| a.checked_mul(d as u64));
            if numel.and_then(|n| n.checked_mul(4)) != Some(t.length) {
                return Err(ArchiveError::TensorShape {
                    tensor: name,
                    shape: t.shape.clone(),
                    length: t.length,
                });
            }
            if t.offset != cursor {
                let what = if t.offset > cursor { "gap" } else { "overlap" };
                return Err(ArchiveError::Tiling(format!(
                    "{what} before {name}: expected offset {cursor}, found {}",
                    t.offset
                )));
            }
            cursor = end.expect("checked");
        }
    }
    if cursor != blob_len {
        return Err(ArchiveError::Tiling(format!(
            "{} trailing bytes after the last tensor",
            blob_len - cursor
        )));
    }
    Ok(())
}

fn rank_error(name: &str, t: &TensorEntry, rank: usize) -> ArchiveError {
    ArchiveError::Manifest(format!("{name} must have rank {rank}, got shape {:?}", t.shape))
}

fn tensor1(blob: &[u8], t: &TensorEntry, name: &str) -> std::result::Result<Array1<f32>, ArchiveError> {
    if t.shape.len() != 1 {
        return Err(rank_error(name, t, 1));
    }
    Ok(Array1::from(f32s_from_le(slice(blob, t))))
}

fn tensor2(blob: &[u8], t: &TensorEntry, name: &str) -> std::result::Result<Array2<f32>, ArchiveError> {
    match t.shape[..] {
        [r, c] => Ok(Array2::from_shape_vec((r, c), f32s_from_le(slice(blob, t))).expect("validated length")),
        _ => Err(rank_error(name, t, 2)),
    }
}

fn tensor4(blob: &[u8], t: &TensorEntry, name: &str) -> std::result::Result<Array4<f32>, ArchiveError> {
    match t.shape[..] {
        [a, b, c, d] => {
            Ok(Array4::from_shape_vec((a, b, c, d), f32s_from_le(slice(blob, t))).expect("validated length"))
        }
        _ => Err(rank_error(name, t, 4)),
    }
}

fn slice<'a>(blob: &'a [u8], t: &TensorEntry) -> &'a [u8] {
    &blob[t.offset as usize..(t.offset + t.length) as usize]
}

pub fn decode_model(bytes: &[u8]) -> Result<NetworkModel> {
    let mut c = Cursor::new(bytes);
    c.magic(MODEL_MAGIC)?;
    check_version(c.u32("version")?, MODEL_VERSION)?;
    let len = c.u64("manifest length")?;
    let len = usize::try_from(len).map_err(|_| ArchiveError::Truncated(format!("manifest length {len}")))?;
    let manifest: Manifest = serde_json::from_slice(c.take(len, "manifest")?)
        .map_err(|e| ArchiveError::Manifest(e.to_string()))?;
    let blob = c.rest();
    validate_manifest(&manifest, blob.len() as u64)?;

    let mut layers = Vec::with_capacity(manifest.layers.len());
    for (i, entry) in manifest.layers.iter().enumerate() {
        let n = |f: &str| format!("layers[{i}].{f}");
        layers.push(match entry {
            LayerEntry::Dense { weights, bias } => LayerSpec::Dense {
                weights: tensor2(blob, weights, &n("weights"))?,
                bias: tensor1(blob, bias, &n("bias"))?,
            },
            LayerEntry::Conv2d {
                kernel,
                bias,
                stride,
                padding,
            } => LayerSpec::Conv2d {
                kernel: tensor4(blob, kernel, &n("kernel"))?,
                bias: tensor1(blob, bias, &n("bias"))?,
                stride: *stride,
                padding: *padding,
            },
            LayerEntry::BatchNorm { scale, shift } => LayerSpec::BatchNorm {
                scale: tensor1(blob, scale, &n("scale"))?,
                shift: tensor1(blob, shift, &n("shift"))?,
            },
            LayerEntry::Activation { activation } => LayerSpec::Activation(*activation),
            LayerEntry::MaxPool { window, stride } => LayerSpec::MaxPool {
                window: *window,
                stride: *stride,
            },
            LayerEntry::Dropout { rate } => LayerSpec::Dropout { rate: *rate },
        });
    }
    NetworkModel::new(manifest.name, manifest.input_shape, layers).map_err(|e| match e {
        Error::Shape(msg) => Error::Archive(ArchiveError::ShapeComposition(msg)),
        other => other,
    })
}

pub fn save_model(path: impl AsRef<Path>, model: &NetworkModel) -> Result<()> {
    std::fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkModel> {
    decode_model(&std::fs::read(path)?)
}
