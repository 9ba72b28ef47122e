//! Median relative error against N for GPFQ and MSQ on Gaussian data, with
//! the fitted log-log slopes. Pass a seed as the first argument.
//!
//!     cargo run --release --example decay_experiment -- 5

use gpfq::lab::{relative_error_decay_experiment, Experiment, ExperimentConfig};

fn main() -> gpfq::Result<()> {
    let mut cfg = ExperimentConfig::default_for(Experiment::Decay);
    cfg.seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let report = relative_error_decay_experiment(&cfg)?;
    println!("m = {}, {} trials per N, seed {}", cfg.m, cfg.trials, cfg.seed);
    println!("{:>6} {:>10} {:>10}", "N", "gpfq", "msq");
    for p in &report.curve {
        println!("{:>6} {:>10.5} {:>10.5}", p.n, p.median_relative_error, p.median_msq_relative_error);
    }
    for c in &report.checks {
        println!("{:<28} {} {}", c.name, if c.passed { "ok  " } else { "FAIL" }, c.detail);
    }
    Ok(())
}
