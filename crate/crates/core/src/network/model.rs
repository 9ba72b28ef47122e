use ndarray::{Array1, Array2, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// No padding; only full windows.
    Valid,
    /// Zero padding so that the output has `ceil(size / stride)` positions.
    /// When the total padding is odd the extra row/column goes at the end.
    Same,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softmax,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }
}

/// One layer of a feed-forward network.
///
/// Per-sample activations are flattened in `(row, col, channel)` row-major
/// order; a dense layer accepts any input whose element count matches its
/// fan-in.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    /// `y = x W + b` with `W` of shape `fan_in × fan_out`.
    Dense {
        weights: Array2<f32>,
        bias: Array1<f32>,
    },
    /// Kernel of shape `kh × kw × c_in × c_out`.
    Conv2d {
        kernel: Array4<f32>,
        bias: Array1<f32>,
        stride: usize,
        padding: Padding,
    },
    /// Folded inference-form batch normalization: `y = scale · x + shift`
    /// per channel (last axis).
    BatchNorm {
        scale: Array1<f32>,
        shift: Array1<f32>,
    },
    Activation(Activation),
    MaxPool {
        window: usize,
        stride: usize,
    },
    /// Identity at inference.
    Dropout {
        rate: f32,
    },
}

impl LayerSpec {
    pub fn dense(weights: Array2<f32>, bias: Array1<f32>) -> Self {
        LayerSpec::Dense { weights, bias }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::BatchNorm { .. } => "batchnorm",
            LayerSpec::Activation(_) => "activation",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Dropout { .. } => "dropout",
        }
    }

    pub fn is_quantizable(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. })
    }

    /// Per-sample output shape for the given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let numel: usize = input.iter().product();
        match self {
            LayerSpec::Dense { weights, bias } => {
                if bias.len() != weights.ncols() {
                    return Err(Error::Shape(format!(
                        "dense bias has length {} but weights have {} columns",
                        bias.len(),
                        weights.ncols()
                    )));
                }
                if numel != weights.nrows() {
                    return Err(Error::Shape(format!(
                        "dense layer expects {} inputs, got shape {:?}",
                        weights.nrows(),
                        input
                    )));
                }
                Ok(vec![weights.ncols()])
            }
            LayerSpec::Conv2d {
                kernel,
                bias,
                stride,
                padding,
            } => {
                let (kh, kw, cin, cout) = kernel.dim();
                if bias.len() != cout {
                    return Err(Error::Shape(format!(
                        "conv2d bias has length {} but kernel has {} output channels",
                        bias.len(),
                        cout
                    )));
                }
                let [h, w, c] = spatial(input, "conv2d")?;
                if c != cin {
                    return Err(Error::Shape(format!(
                        "conv2d expects {cin} input channels, got shape {input:?}"
                    )));
                }
                let g = super::im2col::conv_geometry(h, w, kh, kw, *stride, *padding)?;
                Ok(vec![g.out_h, g.out_w, cout])
            }
            LayerSpec::BatchNorm { scale, shift } => {
                if scale.len() != shift.len() {
                    return Err(Error::Shape("batchnorm scale/shift lengths differ".into()));
                }
                let channels = *input.last().unwrap_or(&0);
                if channels != scale.len() {
                    return Err(Error::Shape(format!(
                        "batchnorm has {} channels, input shape {:?}",
                        scale.len(),
                        input
                    )));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Activation(_) | LayerSpec::Dropout { .. } => Ok(input.to_vec()),
            LayerSpec::MaxPool { window, stride } => {
                let [h, w, c] = spatial(input, "maxpool")?;
                if *window == 0 || *stride == 0 {
                    return Err(Error::Shape("maxpool window and stride must be positive".into()));
                }
                if *window > h || *window > w {
                    return Err(Error::Shape(format!(
                        "maxpool window {window} larger than input {h}x{w}"
                    )));
                }
                Ok(vec![(h - window) / stride + 1, (w - window) / stride + 1, c])
            }
        }
    }
}

fn spatial(input: &[usize], kind: &str) -> Result<[usize; 3]> {
    match input {
        &[h, w, c] => Ok([h, w, c]),
        _ => Err(Error::Shape(format!(
            "{kind} expects an (h, w, c) input, got shape {input:?}"
        ))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    pub name: String,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkModel {
    /// Builds a model and checks that consecutive layer shapes compose.
    pub fn new(name: impl Into<String>, input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self> {
        let model = Self {
            name: name.into(),
            input_shape,
            layers,
        };
        model.layer_shapes()?;
        Ok(model)
    }

    /// Input shape of every layer followed by the output shape.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::Shape(format!("invalid input shape {:?}", self.input_shape)));
        }
        let mut shapes = vec![self.input_shape.clone()];
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.output_shape(shapes.last().expect("nonempty")).map_err(|e| {
                let prev = if i == 0 {
                    "model input".to_string()
                } else {
                    format!("layer {} ({})", i - 1, self.layers[i - 1].kind())
                };
                Error::Shape(format!("{prev} does not compose with layer {i} ({}): {e}", layer.kind()))
            })?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.layer_shapes()?.pop().expect("nonempty"))
    }

    pub fn quantizable_layers(&self) -> impl Iterator<Item = usize> + '_ {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_quantizable())
            .map(|(i, _)| i)
    }
}

/// A calibration or evaluation batch: `m` samples, each flattened from
/// `shape` in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DataBatch {
    shape: Vec<usize>,
    data: Array2<f32>,
}

impl DataBatch {
    pub fn new(shape: Vec<usize>, data: Array2<f32>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.is_empty() || numel == 0 {
            return Err(Error::Shape(format!("invalid sample shape {shape:?}")));
        }
        if data.nrows() == 0 {
            return Err(Error::InvalidConfig("data batch has no samples".into()));
        }
        if data.ncols() != numel {
            return Err(Error::DimensionMismatch {
                context: "sample size",
                expected: numel,
                found: data.ncols(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("data batch has non-finite entries".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &Array2<f32> {
        &self.data
    }
}
