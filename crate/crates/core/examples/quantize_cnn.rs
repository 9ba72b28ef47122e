//! Quantizes a small convolutional network layer by layer. Convolutions are
//! quantized as dense layers over their im2col patches, one neuron per output
//! channel.
//!
//!     cargo run --release --example quantize_cnn

use gpfq::lab::{gaussian_batch, trial_rng};
use gpfq::network::{output_relative_error, Activation, LayerSpec, Padding};
use gpfq::{quantize_network, NetworkModel, QuantizeParams};
use ndarray::{Array1, Array2, Array4};
use rand_distr::{Distribution, Normal};

fn he<R: rand::Rng>(rng: &mut R, n: usize, fan_in: usize) -> Vec<f32> {
    let d = Normal::new(0.0, (2.0 / fan_in as f32).sqrt()).unwrap();
    (0..n).map(|_| d.sample(rng)).collect()
}

fn main() -> gpfq::Result<()> {
    let mut rng = trial_rng(11, 0);
    let model = NetworkModel::new(
        "cnn",
        vec![16, 16, 3],
        vec![
            LayerSpec::Conv2d {
                kernel: Array4::from_shape_vec((3, 3, 3, 16), he(&mut rng, 432, 27)).unwrap(),
                bias: Array1::zeros(16),
                stride: 1,
                padding: Padding::Same,
            },
            LayerSpec::BatchNorm { scale: Array1::from_elem(16, 0.9), shift: Array1::from_elem(16, 0.05) },
            LayerSpec::Activation(Activation::Relu),
            LayerSpec::MaxPool { window: 2, stride: 2 },
            LayerSpec::Conv2d {
                kernel: Array4::from_shape_vec((3, 3, 16, 32), he(&mut rng, 4608, 144)).unwrap(),
                bias: Array1::zeros(32),
                stride: 2,
                padding: Padding::Same,
            },
            LayerSpec::Activation(Activation::Relu),
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::dense(Array2::from_shape_vec((512, 10), he(&mut rng, 5120, 512)).unwrap(), Array1::zeros(10)),
        ],
    )?;
    let calib = gaussian_batch(&mut rng, 64, &[16, 16, 3])?;
    let test = gaussian_batch(&mut rng, 64, &[16, 16, 3])?;

    for levels in [3, 4, 8] {
        for params in [QuantizeParams::gpfq(levels, 2.0), QuantizeParams::msq(levels, 2.0)] {
            let (q, report) = quantize_network(&model, &calib, &params)?;
            let layers: Vec<String> =
                report.layers.iter().map(|l| format!("{} {:.4}", l.kind, l.relative_error)).collect();
            println!(
                "M = {levels} {:<4}  test {:.4}  [{}]",
                params.method.name(),
                output_relative_error(&model, &q, &test)?,
                layers.join(", ")
            );
        }
    }
    Ok(())
}
