use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::im2col::batch_im2col;
use super::model::{Activation, DataBatch, LayerSpec, NetworkModel};
use crate::error::{Error, Result};

/// Activations of a batch at some depth: one row per sample, flattened from
/// the per-sample `shape`.
#[derive(Clone, Debug, PartialEq)]
pub struct Activations {
    pub shape: Vec<usize>,
    pub data: Array2<f64>,
}

impl Activations {
    pub fn from_batch(batch: &DataBatch) -> Self {
        Self {
            shape: batch.shape().to_vec(),
            data: batch.data().mapv(f64::from),
        }
    }

    pub fn samples(&self) -> usize {
        self.data.nrows()
    }
}

pub(crate) fn to_f64_2(a: &Array2<f32>) -> Array2<f64> {
    a.mapv(f64::from)
}

pub(crate) fn to_f64_1(a: &Array1<f32>) -> Array1<f64> {
    a.mapv(f64::from)
}

/// Reshapes a `kh × kw × c_in × c_out` kernel into a `kh·kw·c_in × c_out`
/// matrix whose rows follow the patch vectorization order.
pub(crate) fn kernel_matrix(kernel: &ndarray::Array4<f32>) -> Array2<f64> {
    let (kh, kw, cin, cout) = kernel.dim();
    kernel
        .mapv(f64::from)
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((kh * kw * cin, cout))
        .expect("contiguous")
}

/// `patches · weights + bias`, folded back to one row per sample.
pub(crate) fn conv_from_patches(
    patches: ArrayView2<f64>,
    weights: ArrayView2<f64>,
    bias: &Array1<f64>,
    samples: usize,
) -> Array2<f64> {
    let mut out = patches.dot(&weights);
    out += bias;
    let cols = out.len() / samples;
    out.into_shape_with_order((samples, cols)).expect("contiguous")
}

pub fn apply_layer(layer: &LayerSpec, input: &Activations) -> Result<Activations> {
    let shape = layer.output_shape(&input.shape)?;
    let data = match layer {
        LayerSpec::Dense { weights, bias } => {
            let mut out = input.data.dot(&to_f64_2(weights));
            out += &to_f64_1(bias);
            out
        }
        LayerSpec::Conv2d {
            kernel,
            bias,
            stride,
            padding,
        } => {
            let (kh, kw, _, _) = kernel.dim();
            let s3 = [input.shape[0], input.shape[1], input.shape[2]];
            let (patches, _) = batch_im2col(input.data.view(), s3, kh, kw, *stride, *padding)?;
            conv_from_patches(
                patches.view(),
                kernel_matrix(kernel).view(),
                &to_f64_1(bias),
                input.samples(),
            )
        }
        LayerSpec::BatchNorm { scale, shift } => {
            let c = scale.len();
            let mut out = input.data.clone();
            for mut row in out.rows_mut() {
                for (k, v) in row.iter_mut().enumerate() {
                    *v = f64::from(scale[k % c]) * *v + f64::from(shift[k % c]);
                }
            }
            out
        }
        LayerSpec::Activation(Activation::Identity) | LayerSpec::Dropout { .. } => input.data.clone(),
        LayerSpec::Activation(Activation::Relu) => input.data.mapv(|v| v.max(0.0)),
        LayerSpec::Activation(Activation::Softmax) => {
            let mut out = input.data.clone();
            for mut row in out.rows_mut() {
                let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                row.mapv_inplace(|v| (v - max).exp());
                let sum = row.sum();
                row.mapv_inplace(|v| v / sum);
            }
            out
        }
        LayerSpec::MaxPool { window, stride } => {
            let (h, w, c) = (input.shape[0], input.shape[1], input.shape[2]);
            let (oh, ow) = (shape[0], shape[1]);
            let mut out = Array2::<f64>::zeros((input.samples(), oh * ow * c));
            for (src, mut dst) in input.data.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
                for oy in 0..oh {
                    for ox in 0..ow {
                        for ch in 0..c {
                            let mut m = f64::NEG_INFINITY;
                            for r in 0..*window {
                                for s in 0..*window {
                                    let (y, x) = (oy * stride + r, ox * stride + s);
                                    m = m.max(src[(y * w + x) * c + ch]);
                                }
                            }
                            dst[(oy * ow + ox) * c + ch] = m;
                        }
                    }
                }
                debug_assert!(h >= *window);
            }
            out
        }
    };
    Ok(Activations { shape, data })
}

/// Runs the first `upto` layers (all layers when `None`).
pub fn forward(model: &NetworkModel, batch: &DataBatch, upto: Option<usize>) -> Result<Activations> {
    if batch.shape() != model.input_shape.as_slice() {
        return Err(Error::Shape(format!(
            "batch sample shape {:?} does not match model input {:?}",
            batch.shape(),
            model.input_shape
        )));
    }
    let upto = upto.unwrap_or(model.layers.len());
    if upto > model.layers.len() {
        return Err(Error::InvalidConfig(format!(
            "requested {upto} layers but the model has {}",
            model.layers.len()
        )));
    }
    let mut act = Activations::from_batch(batch);
    for layer in &model.layers[..upto] {
        act = apply_layer(layer, &act)?;
    }
    Ok(act)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::model::Padding;
    use ndarray::{array, Array1, Array3, Array4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch(shape: Vec<usize>, data: Array2<f32>) -> DataBatch {
        DataBatch::new(shape, data).unwrap()
    }

    #[test]
    fn dense_relu() {
        let model = NetworkModel::new(
            "t",
            vec![2],
            vec![
                LayerSpec::dense(array![[1.0, 0.0], [0.0, 1.0]], Array1::zeros(2)),
                LayerSpec::Activation(Activation::Relu),
            ],
        )
        .unwrap();
        let out = forward(&model, &batch(vec![2], array![[-1.0, 2.0]]), None).unwrap();
        assert_eq!(out.data, array![[0.0, 2.0]]);
    }

    #[test]
    fn empty_model_is_identity() {
        let model = NetworkModel::new("t", vec![3], vec![]).unwrap();
        let b = batch(vec![3], array![[1.5, -2.0, 0.25]]);
        let out = forward(&model, &b, None).unwrap();
        assert_eq!(out.data, array![[1.5, -2.0, 0.25]]);
    }

    #[test]
    fn dense_affine() {
        let model = NetworkModel::new(
            "t",
            vec![1],
            vec![
                LayerSpec::dense(array![[2.0]], array![1.0]),
                LayerSpec::Activation(Activation::Identity),
            ],
        )
        .unwrap();
        let out = forward(&model, &batch(vec![1], array![[3.0]]), None).unwrap();
        assert_eq!(out.data, array![[7.0]]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let model = NetworkModel::new("t", vec![3], vec![LayerSpec::Activation(Activation::Softmax)]).unwrap();
        let out = forward(&model, &batch(vec![3], array![[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]]), None).unwrap();
        for row in out.data.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        assert!((out.data[[1, 0]] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn maxpool_and_batchnorm() {
        let fm: Vec<f32> = (0..16).map(|v| v as f32).collect();
        let model = NetworkModel::new(
            "t",
            vec![4, 4, 1],
            vec![
                LayerSpec::MaxPool { window: 2, stride: 2 },
                LayerSpec::BatchNorm {
                    scale: array![2.0],
                    shift: array![-1.0],
                },
            ],
        )
        .unwrap();
        let out = forward(&model, &batch(vec![4, 4, 1], Array2::from_shape_vec((1, 16), fm).unwrap()), None).unwrap();
        assert_eq!(out.shape, vec![2, 2, 1]);
        assert_eq!(out.data.row(0).to_vec(), vec![9.0, 13.0, 25.0, 29.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let err = NetworkModel::new(
            "t",
            vec![3],
            vec![
                LayerSpec::dense(Array2::zeros((3, 4)), Array1::zeros(4)),
                LayerSpec::dense(Array2::zeros((5, 2)), Array1::zeros(2)),
            ],
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("layer 0") && msg.contains("layer 1"), "{msg}");
    }

    /// Direct nested-loop convolution used as an independent oracle.
    fn direct_conv(x: &Array3<f64>, k: &Array4<f64>, b: &[f64], stride: usize, pad: (usize, usize), out: (usize, usize)) -> Array3<f64> {
        let (h, w, cin) = x.dim();
        let (kh, kw, _, cout) = k.dim();
        let mut y = Array3::<f64>::zeros((out.0, out.1, cout));
        for oy in 0..out.0 {
            for ox in 0..out.1 {
                for o in 0..cout {
                    let mut acc = b[o];
                    for r in 0..kh {
                        for s in 0..kw {
                            let iy = (oy * stride + r) as isize - pad.0 as isize;
                            let ix = (ox * stride + s) as isize - pad.1 as isize;
                            if iy < 0 || ix < 0 || iy as usize >= h || ix as usize >= w {
                                continue;
                            }
                            for c in 0..cin {
                                acc += x[[iy as usize, ix as usize, c]] * k[[r, s, c, o]];
                            }
                        }
                    }
                    y[[oy, ox, o]] = acc;
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_direct_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (padding, stride) in [(Padding::Valid, 1), (Padding::Same, 1), (Padding::Same, 2), (Padding::Valid, 2)] {
            // Values on a dyadic grid so every product and sum is exact in f64.
            let x = Array3::from_shape_fn((5, 5, 2), |_| rng.random_range(-8i32..8) as f64 / 4.0);
            let k = Array4::from_shape_fn((3, 3, 2, 3), |_| rng.random_range(-8i32..8) as f64 / 8.0);
            let b = [0.5, -0.25, 0.0];
            let model = NetworkModel::new(
                "c",
                vec![5, 5, 2],
                vec![LayerSpec::Conv2d {
                    kernel: k.mapv(|v| v as f32),
                    bias: Array1::from(b.to_vec()).mapv(|v| v as f32),
                    stride,
                    padding,
                }],
            )
            .unwrap();
            let data = Array2::from_shape_vec((1, 50), x.iter().map(|&v| v as f32).collect()).unwrap();
            let out = forward(&model, &batch(vec![5, 5, 2], data), None).unwrap();
            let g = crate::network::im2col::conv_geometry(5, 5, 3, 3, stride, padding).unwrap();
            let oracle = direct_conv(&x, &k, &b, stride, (g.pad_top, g.pad_left), (g.out_h, g.out_w));
            assert_eq!(out.shape, vec![g.out_h, g.out_w, 3]);
            assert_eq!(out.data.row(0).to_vec(), oracle.iter().copied().collect::<Vec<_>>());
        }
    }
}
