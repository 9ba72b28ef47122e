use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::decay::increment_slack;
use super::{gaussian_vector, trial_rng, Check, ExperimentConfig, ExperimentReport};
use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::gpfq::{dot, QuantizationRunState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub alpha: f64,
    /// Fraction of samples with increment `> α`.
    pub empirical: f64,
    /// Piecewise expression evaluated with the empirical law of `y`.
    pub predicted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementSurvival {
    pub w: f64,
    pub samples: usize,
    pub max_deviation: f64,
    /// `|w| − w²`, the right end of the increment's support.
    pub support_end: f64,
    /// Grid points beyond the support with nonzero empirical survival.
    pub support_violations: usize,
    /// Samples with `Δ‖u‖² > B/4`, `B` the largest `‖X‖²` drawn.
    pub bound_violations: usize,
    pub points: Vec<SurvivalPoint>,
}

/// Fraction of `ys` in the open interval `(lo, hi)`.
fn mu(ys: &[f64], lo: f64, hi: f64) -> f64 {
    ys.iter().filter(|&&y| y > lo && y < hi).count() as f64 / ys.len() as f64
}

/// `P(I > α)` for the normalized increment `I = (w − q)² + 2(w − q) y` of the
/// ternary quantizer, written through the law of `y = ⟨X, u⟩ / ‖X‖²`.
pub fn predicted_survival(ys: &[f64], w: f64, alpha: f64) -> f64 {
    let lower = (alpha - (w + 1.0).powi(2)) / (2.0 * (w + 1.0));
    let upper = (alpha - (w - 1.0).powi(2)) / (2.0 * (w - 1.0));
    let middle = (alpha - w * w) / (2.0 * w);
    if w > 0.0 {
        if alpha < -w - w * w {
            mu(ys, lower, upper)
        } else if alpha <= w - w * w {
            mu(ys, middle, upper)
        } else {
            0.0
        }
    } else if alpha < w - w * w {
        mu(ys, lower, upper)
    } else if alpha <= -w - w * w {
        mu(ys, lower, middle)
    } else {
        0.0
    }
}

/// Default grid of thresholds: `−3.0, −2.95, ..., 0.6`.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=72).map(|k| -3.0 + 0.05 * k as f64).collect()
}

/// Draws `samples` Gaussian columns `X`, takes one quantization step from
/// `u_prev` for each and compares the empirical survival function of the
/// normalized increment with [`predicted_survival`] on the same samples.
pub fn increment_survival_check(
    u_prev: &[f64],
    w: f64,
    alpha_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<IncrementSurvival> {
    if !(w.abs() > 0.0 && w.abs() < 1.0) {
        return Err(Error::InvalidConfig(format!("weight must satisfy 0 < |w| < 1, got {w}")));
    }
    if u_prev.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidConfig("u_prev must be nonzero".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidConfig("samples must be positive".into()));
    }
    let alphabet = Alphabet::ternary();
    let m = u_prev.len();
    let prev_norm_sq = dot(u_prev, u_prev);
    let mut rng = trial_rng(seed, w.to_bits());

    let mut ys = Vec::with_capacity(samples);
    let mut increments = Vec::with_capacity(samples);
    let mut deltas = Vec::with_capacity(samples);
    let mut b: f64 = 0.0;
    for _ in 0..samples {
        let x = gaussian_vector(&mut rng, m, 1.0);
        let norm_sq = dot(&x, &x);
        let y = dot(&x, u_prev) / norm_sq;
        let mut state = QuantizationRunState::from_state(u_prev.to_vec());
        let q = state.step_first_layer_with_norm(w, &x, norm_sq, &alphabet);
        let c = w - q;
        ys.push(y);
        increments.push(c * c + 2.0 * c * y);
        deltas.push(state.state_norm_sq() - prev_norm_sq);
        b = b.max(norm_sq);
    }

    let support_end = w.abs() - w * w;
    let mut points = Vec::with_capacity(alpha_grid.len());
    let mut max_deviation: f64 = 0.0;
    let mut support_violations = 0;
    for &alpha in alpha_grid {
        let empirical = increments.iter().filter(|&&i| i > alpha).count() as f64 / samples as f64;
        let predicted = predicted_survival(&ys, w, alpha);
        max_deviation = max_deviation.max((empirical - predicted).abs());
        if alpha > support_end && empirical != 0.0 {
            support_violations += 1;
        }
        points.push(SurvivalPoint {
            alpha,
            empirical,
            predicted,
        });
    }
    let bound_violations = deltas
        .iter()
        .filter(|&&d| d > b / 4.0 + increment_slack(prev_norm_sq))
        .count();

    Ok(IncrementSurvival {
        w,
        samples,
        max_deviation,
        support_end,
        support_violations,
        bound_violations,
        points,
    })
}

pub(crate) fn increments_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let samples = cfg.samples.expect("validated");
    let grid = default_alpha_grid();
    let mut checks = Vec::new();
    let mut summary = BTreeMap::new();
    for (k, &w) in cfg.w_values.iter().enumerate() {
        let u = gaussian_vector(&mut trial_rng(cfg.seed, k as u64), cfg.m, 1.0);
        let r = increment_survival_check(&u, w, &grid, samples, cfg.seed)?;
        checks.push(Check::new(
            format!("survival_identity_w{w}"),
            r.max_deviation == 0.0,
            format!("max deviation {:e} over {} thresholds", r.max_deviation, grid.len()),
        ));
        checks.push(Check::new(
            format!("survival_support_w{w}"),
            r.support_violations == 0,
            format!("{} thresholds beyond {:.4} with mass", r.support_violations, r.support_end),
        ));
        checks.push(Check::new(
            format!("increment_bound_w{w}"),
            r.bound_violations == 0,
            format!("{} of {samples} steps exceed B/4", r.bound_violations),
        ));
        summary.insert(format!("max_deviation_w{w}"), r.max_deviation);
    }
    Ok(ExperimentReport::new(cfg, vec![], vec![], summary, checks, started))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_support() {
        for w in [0.3, -0.3, 0.7, -0.7] {
            let r = increment_survival_check(&[1.0, -0.5, 2.0], w, &default_alpha_grid(), 5000, 1).unwrap();
            assert_eq!(r.max_deviation, 0.0, "w = {w}");
            assert_eq!(r.support_violations, 0);
            assert_eq!(r.bound_violations, 0);
            // Some mass somewhere, and none past the support.
            assert!(r.points.iter().any(|p| p.empirical > 0.0));
            let beyond = r.points.iter().filter(|p| p.alpha > r.support_end);
            assert!(beyond.clone().count() > 0);
            assert!(beyond.into_iter().all(|p| p.empirical == 0.0));
        }
    }

    #[test]
    fn survival_is_monotone() {
        let r = increment_survival_check(&[0.4, 0.1], 0.3, &default_alpha_grid(), 2000, 2).unwrap();
        for pair in r.points.windows(2) {
            assert!(pair[1].empirical <= pair[0].empirical);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = default_alpha_grid();
        assert!(increment_survival_check(&[1.0], 0.0, &g, 10, 0).is_err());
        assert!(increment_survival_check(&[1.0], 1.0, &g, 10, 0).is_err());
        assert!(increment_survival_check(&[0.0, 0.0], 0.3, &g, 10, 0).is_err());
    }
}
