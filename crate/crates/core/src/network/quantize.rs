//! Layer-by-layer quantization of a whole network.
//!
//! Quantizable layers are processed in order. Layer `ℓ` is quantized against
//! the analog activations `Y = Φ^{(ℓ−1)}(X)` and the activations
//! `Ỹ = Φ̃^{(ℓ−1)}(X)` of the network whose earlier layers are already
//! quantized, so later layers can correct errors made earlier. The same
//! calibration batch is used for every layer.

use std::time::Instant;

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::forward::{apply_layer, kernel_matrix, to_f64_1, to_f64_2, Activations};
use super::im2col::batch_im2col;
use super::model::{DataBatch, LayerSpec, NetworkModel};
use crate::alphabet::{radius_from_weights, Alphabet};
use crate::error::{Error, Result};
use crate::gpfq::{msq_quantize, FirstLayerData, HiddenLayerData};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gpfq,
    Msq,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizeParams {
    pub levels: usize,
    pub c_alpha: f64,
    pub method: Method,
}

impl QuantizeParams {
    pub fn gpfq(levels: usize, c_alpha: f64) -> Self {
        Self {
            levels,
            c_alpha,
            method: Method::Gpfq,
        }
    }

    pub fn msq(levels: usize, c_alpha: f64) -> Self {
        Self {
            levels,
            c_alpha,
            method: Method::Msq,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub index: usize,
    pub kind: String,
    pub levels: usize,
    pub radius: f64,
    pub neurons: usize,
    /// Neuron length including the embedded bias coordinate.
    pub neuron_length: usize,
    /// Rows of the data matrix the neurons were quantized against
    /// (samples × positions for convolutions).
    pub data_rows: usize,
    /// `‖Φ^{(ℓ−1)}(X) − Φ̃^{(ℓ−1)}(X)‖_F`, the input mismatch the layer saw.
    pub input_discrepancy: f64,
    /// `‖Y W + b − Ỹ Q − q_b‖_F` over all pre-activation outputs.
    pub error: f64,
    pub relative_error: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationReport {
    pub schema_version: u32,
    pub model: String,
    pub method: Method,
    pub levels: usize,
    pub c_alpha: f64,
    pub samples: usize,
    pub layers: Vec<LayerReport>,
    /// `‖Φ(X) − Φ̃(X)‖_F` on the calibration batch.
    pub output_error: f64,
    pub output_relative_error: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_ms: Option<f64>,
}

impl QuantizationReport {
    /// Drops every wall-clock field so reports from different runs compare
    /// byte-for-byte.
    pub fn without_timing(mut self) -> Self {
        self.wall_clock_ms = None;
        for l in &mut self.layers {
            l.wall_clock_ms = None;
        }
        self
    }
}

/// Appends `b` as an extra row of `W` and a constant-one column to `X`, so
/// that `X_aug · W_aug = X · W + 1 bᵀ`.
pub fn embed_bias(
    weights: ArrayView2<f64>,
    bias: ArrayView1<f64>,
    data: ArrayView2<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if bias.len() != weights.ncols() {
        return Err(Error::DimensionMismatch {
            context: "bias length",
            expected: weights.ncols(),
            found: bias.len(),
        });
    }
    if data.ncols() != weights.nrows() {
        return Err(Error::DimensionMismatch {
            context: "data width",
            expected: weights.nrows(),
            found: data.ncols(),
        });
    }
    let w_aug = concatenate(Axis(0), &[weights, bias.insert_axis(Axis(0))]).expect("shapes checked");
    Ok((w_aug, append_ones(data)))
}

fn append_ones(data: ArrayView2<f64>) -> Array2<f64> {
    let ones = Array2::<f64>::ones((data.nrows(), 1));
    concatenate(Axis(1), &[data, ones.view()]).expect("same rows")
}

pub(crate) fn frobenius(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn frobenius_diff(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn relative(err: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        err / reference
    } else if err == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// The quantizer's view of one quantizable layer: the neuron matrix (bias
/// row included) and the data matrices it acts on (ones column included).
struct LayerProblem {
    weights: Array2<f64>,
    analog: Array2<f64>,
    quantized: Array2<f64>,
}

fn layer_problem(layer: &LayerSpec, y: &Activations, ytilde: &Activations) -> Result<LayerProblem> {
    match layer {
        LayerSpec::Dense { weights, bias } => {
            let (w_aug, analog) = embed_bias(to_f64_2(weights).view(), to_f64_1(bias).view(), y.data.view())?;
            Ok(LayerProblem {
                weights: w_aug,
                analog,
                quantized: append_ones(ytilde.data.view()),
            })
        }
        LayerSpec::Conv2d {
            kernel,
            bias,
            stride,
            padding,
        } => {
            let (kh, kw, _, _) = kernel.dim();
            let s3 = [y.shape[0], y.shape[1], y.shape[2]];
            let (py, _) = batch_im2col(y.data.view(), s3, kh, kw, *stride, *padding)?;
            let (pyt, _) = batch_im2col(ytilde.data.view(), s3, kh, kw, *stride, *padding)?;
            let (w_aug, analog) = embed_bias(kernel_matrix(kernel).view(), to_f64_1(bias).view(), py.view())?;
            Ok(LayerProblem {
                weights: w_aug,
                analog,
                quantized: append_ones(pyt.view()),
            })
        }
        _ => unreachable!("only dense and conv2d layers are quantized"),
    }
}

/// Rebuilds a layer of the same kind from a quantized neuron matrix whose
/// last row holds the bias codes.
fn rebuild_layer(layer: &LayerSpec, codes: &Array2<f64>) -> LayerSpec {
    let n = codes.nrows() - 1;
    let w = codes.slice(s![..n, ..]).mapv(|v| v as f32);
    let b: Array1<f32> = codes.row(n).mapv(|v| v as f32);
    match layer {
        LayerSpec::Dense { .. } => LayerSpec::Dense { weights: w, bias: b },
        LayerSpec::Conv2d {
            kernel,
            stride,
            padding,
            ..
        } => LayerSpec::Conv2d {
            kernel: w.into_shape_with_order(kernel.dim()).expect("same size"),
            bias: b,
            stride: *stride,
            padding: *padding,
        },
        _ => unreachable!(),
    }
}

fn layer_weights_f64(layer: &LayerSpec) -> Vec<f64> {
    match layer {
        LayerSpec::Dense { weights, .. } => weights.iter().map(|&v| f64::from(v)).collect(),
        LayerSpec::Conv2d { kernel, .. } => kernel.iter().map(|&v| f64::from(v)).collect(),
        _ => Vec::new(),
    }
}

/// Quantizes the codes for one layer.
fn quantize_codes(
    problem: &LayerProblem,
    alphabet: &Alphabet,
    method: Method,
    first: bool,
) -> Result<Array2<f64>> {
    let results = match method {
        Method::Msq => return Ok(msq_quantize(problem.weights.view(), alphabet)),
        Method::Gpfq if first => {
            FirstLayerData::from_matrix(problem.analog.view()).quantize_layer(problem.weights.view(), alphabet)?
        }
        Method::Gpfq => HiddenLayerData::from_matrices(problem.analog.view(), problem.quantized.view())?
            .quantize_layer(problem.weights.view(), alphabet)?,
    };
    let mut codes = Array2::<f64>::zeros(problem.weights.dim());
    for (j, r) in results.into_iter().enumerate() {
        codes.column_mut(j).assign(&ArrayView1::from(&r.q));
    }
    Ok(codes)
}

/// Quantizes every dense and conv2d layer of `model`; all other layers are
/// copied unchanged.
pub fn quantize_network(
    model: &NetworkModel,
    batch: &DataBatch,
    params: &QuantizeParams,
) -> Result<(NetworkModel, QuantizationReport)> {
    let start = Instant::now();
    if model.quantizable_layers().next().is_none() {
        return Err(Error::InvalidConfig("model has no dense or conv2d layer".into()));
    }
    if batch.shape() != model.input_shape.as_slice() {
        return Err(Error::Shape(format!(
            "batch sample shape {:?} does not match model input {:?}",
            batch.shape(),
            model.input_shape
        )));
    }
    model.layer_shapes()?;
    Alphabet::new(params.levels, 1.0)?;

    let mut y = Activations::from_batch(batch);
    let mut ytilde = y.clone();
    let mut layers = Vec::with_capacity(model.layers.len());
    let mut reports = Vec::new();
    let mut first = true;

    for (index, layer) in model.layers.iter().enumerate() {
        if !layer.is_quantizable() {
            y = apply_layer(layer, &y)?;
            ytilde = apply_layer(layer, &ytilde)?;
            layers.push(layer.clone());
            continue;
        }
        let t0 = Instant::now();
        let radius = radius_from_weights(layer_weights_f64(layer), params.c_alpha)?;
        let alphabet = Alphabet::new(params.levels, radius)?;
        let problem = layer_problem(layer, &y, &ytilde)?;
        let codes = quantize_codes(&problem, &alphabet, params.method, first)?;
        first = false;
        let qlayer = rebuild_layer(layer, &codes);

        let input_discrepancy = frobenius_diff(y.data.view(), ytilde.data.view());
        let y_next = apply_layer(layer, &y)?;
        let yt_next = apply_layer(&qlayer, &ytilde)?;
        let error = frobenius_diff(y_next.data.view(), yt_next.data.view());
        let reference = frobenius(y_next.data.view());
        reports.push(LayerReport {
            index,
            kind: layer.kind().to_string(),
            levels: params.levels,
            radius,
            neurons: problem.weights.ncols(),
            neuron_length: problem.weights.nrows(),
            data_rows: problem.analog.nrows(),
            input_discrepancy,
            error,
            relative_error: relative(error, reference),
            wall_clock_ms: Some(t0.elapsed().as_secs_f64() * 1e3),
        });
        y = y_next;
        ytilde = yt_next;
        layers.push(qlayer);
    }

    let output_error = frobenius_diff(y.data.view(), ytilde.data.view());
    let quantized = NetworkModel {
        name: format!("{}-{}", model.name, params.method.name()),
        input_shape: model.input_shape.clone(),
        layers,
    };
    let report = QuantizationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model: model.name.clone(),
        method: params.method,
        levels: params.levels,
        c_alpha: params.c_alpha,
        samples: batch.samples(),
        layers: reports,
        output_error,
        output_relative_error: relative(output_error, frobenius(y.data.view())),
        seed: None,
        wall_clock_ms: Some(start.elapsed().as_secs_f64() * 1e3),
    };
    Ok((quantized, report))
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gpfq => "gpfq",
            Method::Msq => "msq",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerError {
    pub index: usize,
    pub error: f64,
    pub relative_error: f64,
}

/// Per-layer pre-activation errors recomputed from an analog model and its
/// quantized counterpart, by independent forward passes.
pub fn layer_errors(analog: &NetworkModel, quantized: &NetworkModel, batch: &DataBatch) -> Result<Vec<LayerError>> {
    if analog.layers.len() != quantized.layers.len() {
        return Err(Error::Shape("models have different layer counts".into()));
    }
    let mut out = Vec::new();
    for index in analog.quantizable_layers() {
        let y = super::forward::forward(analog, batch, Some(index + 1))?;
        let yt = super::forward::forward(quantized, batch, Some(index + 1))?;
        let error = frobenius_diff(y.data.view(), yt.data.view());
        out.push(LayerError {
            index,
            error,
            relative_error: relative(error, frobenius(y.data.view())),
        });
    }
    Ok(out)
}

/// `‖Φ(X) − Φ̃(X)‖_F / ‖Φ(X)‖_F` over full forward passes.
pub fn output_relative_error(reference: &NetworkModel, model: &NetworkModel, batch: &DataBatch) -> Result<f64> {
    let a = super::forward::forward(reference, batch, None)?;
    let b = super::forward::forward(model, batch, None)?;
    if a.data.dim() != b.data.dim() {
        return Err(Error::Shape("models produce outputs of different shapes".into()));
    }
    Ok(relative(
        frobenius_diff(a.data.view(), b.data.view()),
        frobenius(a.data.view()),
    ))
}

/// Neuron matrix and patch data (bias embedded) for a conv or dense layer
/// quantized as a first layer on `y`.
pub fn layer_data_matrices(layer: &LayerSpec, y: &Activations) -> Result<(Array2<f64>, Array2<f64>)> {
    let p = layer_problem(layer, y, y)?;
    Ok((p.weights, p.analog))
}
