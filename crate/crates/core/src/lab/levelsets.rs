use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gaussian_vector, trial_rng, Check, ExperimentConfig, ExperimentReport};
use crate::alphabet::Alphabet;
use crate::error::Result;
use crate::gpfq::{dot, QuantizationRunState};

/// Relative width of the band around a sphere or hyperplane inside which
/// either code is accepted.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelSetRegime {
    /// `|w| < 1/2`: both nonzero codes have ball level sets.
    Inner,
    /// `1/2 < |w| < 1`: the code matching the sign of `w` has the complement
    /// of a ball as its level set.
    Outer,
    /// `|w| = 1/2`: the code matching the sign of `w` has a half-space.
    HalfSpace,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelSetSummary {
    pub inner: usize,
    pub outer: usize,
    pub half_space: usize,
    /// Triples within the tie band, counted as agreeing.
    pub ties: usize,
    pub violations: usize,
}

impl LevelSetSummary {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Membership predicted by the geometry: `Some(true)` inside, `Some(false)`
/// outside, `None` in the tie band.
fn in_ball(x: &[f64], center: &[f64]) -> Option<bool> {
    let r_sq = dot(center, center);
    let d_sq: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
    let scale = dot(x, x) + r_sq;
    if (d_sq - r_sq).abs() <= TIE_TOLERANCE * scale {
        None
    } else {
        Some(d_sq < r_sq)
    }
}

fn in_half_space(x: &[f64], normal: &[f64]) -> Option<bool> {
    let ip = dot(x, normal);
    if ip.abs() <= TIE_TOLERANCE * (dot(x, x) * dot(normal, normal)).sqrt() {
        None
    } else {
        Some(ip > 0.0)
    }
}

fn scaled(u: &[f64], c: f64) -> Vec<f64> {
    u.iter().map(|v| c * v).collect()
}

/// Predicted membership of `x` in the level sets of `q = 1` and `q = −1` for
/// the ternary alphabet, given state `u` and weight `w`.
fn predicted(u: &[f64], w: f64, x: &[f64]) -> (Option<bool>, Option<bool>) {
    let plus = if w == 0.5 {
        in_half_space(x, u)
    } else {
        let ball = in_ball(x, &scaled(u, 1.0 / (1.0 - 2.0 * w)));
        if w < 0.5 {
            ball
        } else {
            ball.map(|b| !b)
        }
    };
    let minus = if w == -0.5 {
        in_half_space(x, &scaled(u, -1.0))
    } else {
        let ball = in_ball(x, &scaled(u, -1.0 / (1.0 + 2.0 * w)));
        if w > -0.5 {
            ball
        } else {
            ball.map(|b| !b)
        }
    };
    (plus, minus)
}

/// Returns `(agrees, tie)` for one triple, comparing the production step
/// with the geometric description of its level sets.
fn check_triple(u: &[f64], w: f64, x: &[f64], alphabet: &Alphabet) -> (bool, bool) {
    let mut state = QuantizationRunState::from_state(u.to_vec());
    let q = state.step_first_layer(w, x, alphabet);
    let (plus, minus) = predicted(u, w, x);
    let tie = plus.is_none() || minus.is_none();
    let agrees = plus.is_none_or(|p| p == (q == 1.0)) && minus.is_none_or(|p| p == (q == -1.0));
    (agrees, tie)
}

/// Samples `trials` triples `(u, w, X)` in each regime and counts
/// disagreements between the quantizer and its ball (or complement, or
/// half-space) level sets. `m` is the ambient dimension.
pub fn level_set_check(trials: usize, seed: u64, m: usize) -> LevelSetSummary {
    let alphabet = Alphabet::ternary();
    let mut summary = LevelSetSummary::default();
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let regimes = [
            (LevelSetRegime::Inner, rng.random_range(-0.5f64..0.5)),
            (LevelSetRegime::Outer, sign * rng.random_range(0.5..1.0)),
            (LevelSetRegime::HalfSpace, sign * 0.5),
        ];
        for (regime, w) in regimes {
            if regime == LevelSetRegime::Outer && w.abs() == 0.5 {
                continue;
            }
            let u = gaussian_vector(&mut rng, m, 1.0);
            let x = gaussian_vector(&mut rng, m, 1.0);
            let (agrees, tie) = check_triple(&u, w, &x, &alphabet);
            match regime {
                LevelSetRegime::Inner => summary.inner += 1,
                LevelSetRegime::Outer => summary.outer += 1,
                LevelSetRegime::HalfSpace => summary.half_space += 1,
            }
            summary.ties += tie as usize;
            summary.violations += !agrees as usize;
        }
    }
    summary
}

pub(crate) fn level_set_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let s = level_set_check(cfg.trials, cfg.seed, cfg.m);
    let checks = vec![Check::new(
        "level_set_geometry",
        s.passed(),
        format!(
            "{} violations over {} inner, {} outer and {} half-space triples ({} ties)",
            s.violations, s.inner, s.outer, s.half_space, s.ties
        ),
    )];
    let summary: BTreeMap<String, f64> = [
        ("inner", s.inner),
        ("outer", s.outer),
        ("half_space", s.half_space),
        ("ties", s.ties),
        ("violations", s.violations),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v as f64))
    .collect();
    Ok(ExperimentReport::new(cfg, vec![], vec![], summary, checks, started))
}
