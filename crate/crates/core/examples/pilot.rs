//! Regenerates `fixtures/pilot.json`: runs the generalization experiment at
//! a seed kept apart from the test seeds and fixes the ratio bound at twice
//! the observed 95th percentile.
//!
//!     cargo run --release --example pilot > crates/core/fixtures/pilot.json

use gpfq::lab::{generalization_experiment, Experiment, ExperimentConfig, PilotConstants};

const PILOT_SEED: u64 = 1000;
const PILOT_TRIALS: usize = 400;
const SAFETY_FACTOR: f64 = 2.0;

fn main() -> gpfq::Result<()> {
    let mut cfg = ExperimentConfig::default_for(Experiment::Generalize);
    cfg.seed = PILOT_SEED;
    cfg.trials = PILOT_TRIALS;
    cfg.ratio_bound = Some(f64::INFINITY);
    let report = generalization_experiment(&cfg)?;

    let mut ratios: Vec<f64> = report.records.iter().filter_map(|r| r.bound_ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let p95 = ratios[(0.95 * (ratios.len() - 1) as f64).round() as usize];
    let constants = PilotConstants {
        pilot_seed: PILOT_SEED,
        pilot_trials: PILOT_TRIALS,
        m: cfg.m,
        n: cfg.n_grid[0],
        ratio_p95: p95,
        ratio_max: *ratios.last().unwrap(),
        safety_factor: SAFETY_FACTOR,
        generalization_ratio_bound: SAFETY_FACTOR * p95,
    };
    println!("{}", serde_json::to_string_pretty(&constants).unwrap());
    Ok(())
}
