//! Quantizes a single neuron with weights in [-1, 1] to the ternary alphabet
//! against Gaussian data, and compares the residual with rounding each weight.
//!
//!     cargo run --release --example quantize_neuron

use gpfq::lab::{gaussian_matrix, trial_rng};
use gpfq::{msq_quantize_vec, residual_norm, Alphabet, FirstLayerData};
use rand::Rng;

fn main() -> gpfq::Result<()> {
    let mut rng = trial_rng(7, 0);
    let (m, n) = (32, 4096);
    let x = gaussian_matrix(&mut rng, m, n, 1.0);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let alphabet = Alphabet::ternary();

    let analog = residual_norm(x.view(), &w, &vec![0.0; n]);
    println!("m = {m}, ‖Xw‖ = {analog:.2}");
    println!("{:>6} {:>12} {:>12} {:>12}", "N", "gpfq", "msq", "sup ‖u_t‖");
    let mut k = 64;
    while k <= n {
        let xs = x.slice(ndarray::s![.., ..k]);
        let r = FirstLayerData::from_matrix(xs).quantize(&w[..k], &alphabet)?;
        let norm = residual_norm(xs, &w[..k], &vec![0.0; k]);
        let msq = residual_norm(xs, &w[..k], &msq_quantize_vec(&w[..k], &alphabet));
        println!("{k:>6} {:>12.5} {:>12.5} {:>12.3}", r.final_error / norm, msq / norm, r.trajectory_sup);
        k *= 4;
    }
    Ok(())
}
