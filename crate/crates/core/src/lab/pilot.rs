use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Constants fixed once from a pilot run at a seed distinct from the
/// acceptance seeds. Regenerate with `cargo run --release --example pilot`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotConstants {
    pub pilot_seed: u64,
    pub pilot_trials: usize,
    pub m: usize,
    pub n: usize,
    /// 95th percentile of the generalization ratio in the pilot.
    pub ratio_p95: f64,
    pub ratio_max: f64,
    /// Multiplier applied to `ratio_p95`.
    pub safety_factor: f64,
    /// Bound used by the generalization check.
    pub generalization_ratio_bound: f64,
}

static PILOT: OnceLock<PilotConstants> = OnceLock::new();

pub fn pilot_constants() -> &'static PilotConstants {
    PILOT.get_or_init(|| {
        serde_json::from_str(include_str!("../../fixtures/pilot.json")).expect("fixtures/pilot.json is valid")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_consistent() {
        let p = pilot_constants();
        assert!(p.generalization_ratio_bound > 0.0);
        assert!(p.ratio_p95 <= p.ratio_max);
        assert!((p.generalization_ratio_bound - p.safety_factor * p.ratio_p95).abs() < 1e-9 * p.generalization_ratio_bound);
    }
}
