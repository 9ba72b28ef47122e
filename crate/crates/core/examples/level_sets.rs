//! Geometry of a single ternary step. For fixed state u and weight w the set
//! of inputs X that are mapped to +1 is a ball, the complement of a ball or a
//! half-space depending on |w|. The second table compares the empirical tail
//! of the increment ‖u_t‖² − ‖u_{t−1}‖² with its closed form.
//!
//!     cargo run --release --example level_sets

use gpfq::lab::{default_alpha_grid, gaussian_vector, increment_survival_check, level_set_check, trial_rng};

fn main() -> gpfq::Result<()> {
    for m in [2, 8, 32] {
        let s = level_set_check(5000, 1, m);
        println!(
            "m = {m:>2}: {} inner, {} outer, {} half-space triples, {} violations",
            s.inner, s.outer, s.half_space, s.violations
        );
    }

    let u = gaussian_vector(&mut trial_rng(2, 0), 8, 1.0);
    let grid = default_alpha_grid();
    for w in [0.3, 0.7] {
        let r = increment_survival_check(&u, w, &grid, 20_000, 2)?;
        println!("\nw = {w}: support ends at {:.4}, max deviation {:e}", r.support_end, r.max_deviation);
        println!("{:>8} {:>10} {:>10}", "alpha", "empirical", "predicted");
        for p in r.points.iter().step_by(8) {
            println!("{:>8.2} {:>10.4} {:>10.4}", p.alpha, p.empirical, p.predicted);
        }
    }
    Ok(())
}
