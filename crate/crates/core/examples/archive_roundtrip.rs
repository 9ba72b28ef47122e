//! Writes a model and a data batch to disk, quantizes through the file
//! formats and checks that reloading reproduces the same bytes. Top-1
//! agreement with the analog model is reported using its own predictions as
//! labels.
//!
//!     cargo run --release --example archive_roundtrip

use gpfq::io::{encode_model, load_data, load_model, save_data, save_model};
use gpfq::lab::{gaussian_batch, gaussian_mlp, trial_rng};
use gpfq::network::{forward, top_k_accuracy};
use gpfq::{quantize_network, QuantizeParams};

fn main() -> gpfq::Result<()> {
    let dir = std::env::temp_dir().join(format!("gpfq-archive-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut rng = trial_rng(5, 0);
    let model = gaussian_mlp(&mut rng, 128, &[512, 256, 10])?;
    save_model(dir.join("analog.nnqm"), &model)?;
    save_data(dir.join("calib.nnqd"), &gaussian_batch(&mut rng, 256, &[128])?)?;
    save_data(dir.join("test.nnqd"), &gaussian_batch(&mut rng, 512, &[128])?)?;

    let analog = load_model(dir.join("analog.nnqm"))?;
    assert_eq!(analog, model);
    let calib = load_data(dir.join("calib.nnqd"))?;
    let test = load_data(dir.join("test.nnqd"))?;
    let (q, report) = quantize_network(&analog, &calib, &QuantizeParams::gpfq(3, 2.0))?;
    save_model(dir.join("quantized.nnqm"), &q)?;
    let reloaded = load_model(dir.join("quantized.nnqm"))?;
    assert_eq!(encode_model(&reloaded), std::fs::read(dir.join("quantized.nnqm"))?);

    let scores = forward(&analog, &test, None)?.data;
    let labels: Vec<usize> = scores
        .rows()
        .into_iter()
        .map(|r| (0..r.len()).fold(0, |b, j| if r[j] > r[b] { j } else { b }))
        .collect();
    let out = forward(&reloaded, &test, None)?.data;
    println!("output relative error on calibration data: {:.4}", report.output_relative_error);
    println!("top-1 agreement with analog: {:.3}", top_k_accuracy(out.view(), &labels, 1)?);
    println!("top-3 agreement with analog: {:.3}", top_k_accuracy(out.view(), &labels, 3)?);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
