//! Two regimes with closed-form behavior. With every column equal to the same
//! unit vector GPFQ reduces to first-order Σ∆ and the state never leaves
//! [-1/2, 1/2]. With orthogonal columns it reduces to rounding each weight.
//!
//!     cargo run --release --example special_cases

use gpfq::lab::{adversarial_case, sigma_delta_case, trial_rng};
use gpfq::Alphabet;
use rand::Rng;

fn main() -> gpfq::Result<()> {
    let alphabet = Alphabet::ternary();
    let mut rng = trial_rng(3, 0);
    let e = [0.6, 0.8];
    for n in [10, 100, 1000, 10000] {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        println!("sigma-delta N = {n:>5}: max ‖u_t‖ = {:.4}", sigma_delta_case(&w, &e, &alphabet));
    }
    for m in [8, 64, 512] {
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = adversarial_case(&mut rng, &w, m, &alphabet)?;
        println!(
            "orthogonal m = {m:>3}: codes equal rounding: {}, max relative deviation of ‖u_t‖² {:.1e}",
            out.codes_match(),
            out.max_relative_deviation
        );
    }
    Ok(())
}
