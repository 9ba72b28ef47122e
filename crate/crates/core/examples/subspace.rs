//! Data lying in a d-dimensional subspace of R^m. Quantizing against X = ZA,
//! with Z an orthonormal embedding, gives the same codes as quantizing against
//! A itself, so the error does not grow with m.
//!
//!     cargo run --release --example subspace

use gpfq::lab::{gaussian_matrix, orthonormal_columns, sample_weights, subspace_trial, trial_rng};
use gpfq::Alphabet;

fn main() -> gpfq::Result<()> {
    let (d, n) = (8, 1024);
    let mut rng = trial_rng(4, 0);
    let a = gaussian_matrix(&mut rng, d, n, 1.0 / (d as f64).sqrt());
    let w = sample_weights(&mut rng, n, 0.0);
    let alphabet = Alphabet::ternary();
    println!("{:>6} {:>14} {:>14}", "m", "error", "codes equal");
    for m in [8, 64, 512, 2048] {
        let g = gaussian_matrix(&mut rng, m, d, 1.0);
        let z = orthonormal_columns(&g);
        let out = subspace_trial(z.view(), a.view(), &w, &alphabet)?;
        println!("{m:>6} {:>14.6} {:>14}", out.final_error_full, out.codes_match());
    }
    Ok(())
}

