//! GPFQ against MSQ on random Gaussian MLPs of two widths. The radius
//! multiplier of each method is picked on a validation batch; the table
//! shows median relative output errors on held-out data.
//!
//!     cargo run --release --example quantize_mlp

use gpfq::lab::{run_mlp_study, MlpStudy};

fn main() -> gpfq::Result<()> {
    for widths in [[1024, 512, 10], [64, 64, 10]] {
        let mut study = MlpStudy::new(&widths);
        study.seeds = (0..5).collect();
        let r = run_mlp_study(&study)?;
        println!("widths {widths:?}");
        println!("{:>6} {:>10} {:>10}", "C", "gpfq", "msq");
        for (k, c) in study.c_grid.iter().enumerate() {
            println!(
                "{c:>6} {:>10.4} {:>10.4}",
                r.gpfq.validation_medians[k], r.msq.validation_medians[k]
            );
        }
        println!(
            "test: gpfq {:.4} (C = {}), msq {:.4} (C = {}), gpfq better on {}/{} seeds\n",
            r.gpfq.test_median,
            r.gpfq.best_c,
            r.msq.test_median,
            r.msq.best_c,
            r.gpfq_wins,
            study.seeds.len()
        );
    }
    Ok(())
}
