use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::{
    fit_decay_slope, gaussian_matrix, median, sample_weights, trial_rng, Check, CurvePoint,
    ExperimentConfig, ExperimentReport, TrialRecord,
};
use crate::error::Result;
use crate::gpfq::{msq_quantize_vec, residual_norm, FirstLayerData};

/// Accepted range of the fitted log-log slope of the median GPFQ relative error.
pub const GPFQ_SLOPE_WINDOW: (f64, f64) = (-0.65, -0.35);
/// Accepted range of the MSQ slope (no decay).
pub const MSQ_SLOPE_WINDOW: (f64, f64) = (-0.1, 0.1);
/// Largest tolerated fraction of trials whose trajectory leaves the
/// stability envelope.
pub const STABILITY_MAX_FRACTION: f64 = 0.05;

/// Slack on `Δ‖u_t‖² ≤ B/4` for rounding in the two squared norms.
pub(crate) fn increment_slack(prev_norm_sq: f64) -> f64 {
    1e-12 * prev_norm_sq.max(1.0)
}

struct DecayTrial {
    record: TrialRecord,
    increment_violations: usize,
    unstable: bool,
}

fn run_trial(cfg: &ExperimentConfig, grid_index: usize, n: usize, trial: usize) -> Result<DecayTrial> {
    let sigma = cfg.sigma_or_default();
    let alphabet = cfg.alphabet()?;
    let mut rng = trial_rng(cfg.seed, ((grid_index as u64) << 32) | trial as u64);
    let x = gaussian_matrix(&mut rng, cfg.m, n, sigma);
    let w = sample_weights(&mut rng, n, cfg.epsilon);

    let data = FirstLayerData::from_matrix(x.view());
    let res = data.quantize_traced(&w, &alphabet, true)?;
    let analog = x.dot(&ndarray::ArrayView1::from(&w[..]));
    let analog_norm = analog.dot(&analog).sqrt();
    let msq = msq_quantize_vec(&w, &alphabet);
    let msq_err = residual_norm(x.view(), &w, &msq);

    // Increment bound with B = max_t ‖X_t‖².
    let b = (0..n).map(|t| data.column_norm_sq(t)).fold(0.0, f64::max);
    let trace = res.trace.as_deref().expect("trace requested");
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for pair in trace.windows(2) {
        let delta = pair[1] - pair[0];
        if delta > b / 4.0 + increment_slack(pair[0]) {
            violations += 1;
        }
        worst = worst.max(delta / (b / 4.0));
    }

    let m = cfg.m as f64;
    let envelope = 10.0 * m.sqrt() * (n as f64).ln() * sigma * m.sqrt();
    Ok(DecayTrial {
        record: TrialRecord {
            n,
            trial,
            relative_error: Some(res.final_error / analog_norm),
            final_error: Some(res.final_error),
            trajectory_sup: Some(res.trajectory_sup),
            msq_relative_error: Some(msq_err / analog_norm),
            increment_ratio: Some(worst),
            ..Default::default()
        },
        increment_violations: violations,
        unstable: !res.trajectory_sup.is_finite() || res.trajectory_sup > envelope,
    })
}

/// Relative training error `‖Xw − Xq‖ / ‖Xw‖` of GPFQ and MSQ as a function
/// of the neuron length, with Gaussian columns `X_t ~ N(0, σ² I_m)`.
pub fn relative_error_decay_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let jobs: Vec<(usize, usize, usize)> = cfg
        .n_grid
        .iter()
        .enumerate()
        .flat_map(|(g, &n)| (0..cfg.trials).map(move |t| (g, n, t)))
        .collect();
    let trials: Vec<DecayTrial> = jobs
        .par_iter()
        .map(|&(g, n, t)| run_trial(cfg, g, n, t))
        .collect::<Result<_>>()?;

    let mut curve = Vec::new();
    for (g, &n) in cfg.n_grid.iter().enumerate() {
        let chunk = &trials[g * cfg.trials..(g + 1) * cfg.trials];
        let gpfq: Vec<f64> = chunk.iter().map(|t| t.record.relative_error.unwrap()).collect();
        let msq: Vec<f64> = chunk.iter().map(|t| t.record.msq_relative_error.unwrap()).collect();
        curve.push(CurvePoint {
            n,
            median_relative_error: median(&gpfq),
            median_msq_relative_error: median(&msq),
        });
    }
    let gpfq_fit = fit_decay_slope(
        &curve
            .iter()
            .map(|p| (p.n as f64, p.median_relative_error))
            .collect::<Vec<_>>(),
    )?;
    let msq_fit = fit_decay_slope(
        &curve
            .iter()
            .map(|p| (p.n as f64, p.median_msq_relative_error))
            .collect::<Vec<_>>(),
    )?;
    let violations: usize = trials.iter().map(|t| t.increment_violations).sum();
    let worst_increment = trials
        .iter()
        .filter_map(|t| t.record.increment_ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let unstable = trials.iter().filter(|t| t.unstable).count();
    let unstable_fraction = unstable as f64 / trials.len() as f64;
    let last = curve.last().expect("nonempty grid");

    let in_window = |s: f64, (lo, hi): (f64, f64)| s >= lo && s <= hi;
    let checks = vec![
        Check::new(
            "gpfq_slope",
            in_window(gpfq_fit.slope, GPFQ_SLOPE_WINDOW),
            format!("slope {:.4} in [{}, {}]", gpfq_fit.slope, GPFQ_SLOPE_WINDOW.0, GPFQ_SLOPE_WINDOW.1),
        ),
        Check::new(
            "msq_slope",
            in_window(msq_fit.slope, MSQ_SLOPE_WINDOW),
            format!("slope {:.4} in [{}, {}]", msq_fit.slope, MSQ_SLOPE_WINDOW.0, MSQ_SLOPE_WINDOW.1),
        ),
        Check::new(
            "gpfq_below_msq_at_largest_n",
            last.median_relative_error < last.median_msq_relative_error,
            format!(
                "N = {}: gpfq {:.5} vs msq {:.5}",
                last.n, last.median_relative_error, last.median_msq_relative_error
            ),
        ),
        Check::new(
            "increment_bound",
            violations == 0,
            format!("{violations} steps with Δ‖u‖² > B/4; largest Δ/(B/4) = {worst_increment:.4}"),
        ),
        Check::new(
            "stability_envelope",
            unstable_fraction <= STABILITY_MAX_FRACTION,
            format!("{unstable} of {} trials exceed 10·m·σ·log N", trials.len()),
        ),
    ];

    let mut summary = BTreeMap::new();
    summary.insert("gpfq_slope".into(), gpfq_fit.slope);
    summary.insert("gpfq_intercept".into(), gpfq_fit.intercept);
    summary.insert("msq_slope".into(), msq_fit.slope);
    summary.insert("msq_intercept".into(), msq_fit.intercept);
    summary.insert("increment_violations".into(), violations as f64);
    summary.insert("max_increment_ratio".into(), worst_increment);
    summary.insert("unstable_fraction".into(), unstable_fraction);
    summary.insert("sigma".into(), cfg.sigma_or_default());

    Ok(ExperimentReport::new(
        cfg,
        trials.into_iter().map(|t| t.record).collect(),
        curve,
        summary,
        checks,
        started,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::Experiment;

    #[test]
    fn small_run_is_deterministic_and_consistent() {
        let mut cfg = ExperimentConfig::default_for(Experiment::Decay);
        cfg.m = 5;
        cfg.n_grid = vec![16, 64, 256];
        cfg.trials = 4;
        cfg.seed = 3;
        let a = relative_error_decay_experiment(&cfg).unwrap().without_timing();
        let b = relative_error_decay_experiment(&cfg).unwrap().without_timing();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.records.len(), 12);
        assert!(a.check("increment_bound").unwrap().passed);
        for r in &a.records {
            assert!(r.trajectory_sup.unwrap() >= r.final_error.unwrap());
        }
    }
}
