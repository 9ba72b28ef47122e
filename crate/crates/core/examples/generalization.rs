//! Error of a quantized neuron on fresh inputs drawn from the same subspace
//! as the calibration data, relative to the high-probability bound.
//!
//!     cargo run --release --example generalization

use gpfq::lab::{generalization_experiment, pilot_constants, Experiment, ExperimentConfig};

fn main() -> gpfq::Result<()> {
    let cfg = ExperimentConfig::default_for(Experiment::Generalize);
    let report = generalization_experiment(&cfg)?;
    println!("ratio bound from the pilot run: {:.5}", pilot_constants().generalization_ratio_bound);
    for (k, v) in &report.summary {
        println!("{k:<24} {v:.6}");
    }
    for c in &report.checks {
        println!("{} {}", if c.passed { "ok  " } else { "FAIL" }, c.detail);
    }
    Ok(())
}
