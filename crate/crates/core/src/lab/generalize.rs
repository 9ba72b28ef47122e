use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;
use rayon::prelude::*;

use super::{
    gaussian_matrix, gaussian_vector, median, pilot_constants, sample_weights, to_dmatrix, trial_rng, Check,
    ExperimentConfig, ExperimentReport, TrialRecord,
};
use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::gpfq::FirstLayerData;

/// Fraction of trials that must satisfy the ratio bound.
pub const REQUIRED_FRACTION: f64 = 0.95;

/// Scale of the out-of-sample error bound:
/// `(σ_z m / (σ(√N − √m))) · σ m log N`.
pub fn generalization_bound(m: usize, n: usize, sigma: f64, sigma_z: f64) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    (sigma_z * mf / (sigma * (nf.sqrt() - mf.sqrt()))) * sigma * mf * nf.ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizationTrial {
    /// `|zᵀ(w − q)|`.
    pub error: f64,
    pub bound: f64,
    pub ratio: f64,
    /// `‖X(w − q)‖₂`.
    pub training_error: f64,
}

/// Orthonormal basis (`N × m`) of the row space of `x` from its SVD.
fn row_space_basis(x: &Array2<f64>) -> Result<Array2<f64>> {
    let (m, n) = x.dim();
    let svd = to_dmatrix(x).svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > smax * 1e-10 * (m.max(n) as f64))
        .count();
    if rank < m {
        return Err(Error::RankDeficient { rank, required: m });
    }
    Ok(Array2::from_shape_fn((n, vt.nrows()), |(i, j)| vt[(j, i)]))
}

/// Draws `z = V g` from the span of the rows of `x` and evaluates the
/// out-of-sample error of `q` against `w`.
pub fn generalization_trial<R: Rng + ?Sized>(
    rng: &mut R,
    x: &Array2<f64>,
    w: &[f64],
    q: &[f64],
    sigma: f64,
    sigma_z: f64,
) -> Result<GeneralizationTrial> {
    let (m, n) = x.dim();
    let v = row_space_basis(x)?;
    let g = Array1::from(gaussian_vector(rng, m, sigma_z));
    let z = v.dot(&g);
    let diff: Array1<f64> = w.iter().zip(q).map(|(a, b)| a - b).collect();
    let error = z.dot(&diff).abs();
    let residual = x.dot(&diff);
    let bound = generalization_bound(m, n, sigma, sigma_z);
    Ok(GeneralizationTrial {
        error,
        bound,
        ratio: error / bound,
        training_error: residual.dot(&residual).sqrt(),
    })
}

fn run_trial(cfg: &ExperimentConfig, alphabet: &Alphabet, n: usize, trial: usize) -> Result<TrialRecord> {
    let sigma = cfg.sigma_or_default();
    let sigma_z = cfg.sigma_z.unwrap_or(sigma * (n as f64 / cfg.m as f64).sqrt());
    let mut rng = trial_rng(cfg.seed, trial as u64);
    let x = gaussian_matrix(&mut rng, cfg.m, n, sigma);
    let w = sample_weights(&mut rng, n, cfg.epsilon);
    let res = FirstLayerData::from_matrix(x.view()).quantize(&w, alphabet)?;
    let t = generalization_trial(&mut rng, &x, &w, &res.q, sigma, sigma_z)?;
    Ok(TrialRecord {
        n,
        trial,
        final_error: Some(res.final_error),
        trajectory_sup: Some(res.trajectory_sup),
        generalization_error: Some(t.error),
        bound_ratio: Some(t.ratio),
        ..Default::default()
    })
}

/// Out-of-sample error `|zᵀ(w − q)|` for `z` drawn from the span of the
/// training rows, compared with the bound scale in [`generalization_bound`].
pub fn generalization_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let alphabet = cfg.alphabet()?;
    let bound = cfg.ratio_bound.unwrap_or(pilot_constants().generalization_ratio_bound);
    let mut records = Vec::new();
    let mut checks = Vec::new();
    let mut summary = BTreeMap::new();
    for &n in &cfg.n_grid {
        let rows: Vec<TrialRecord> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, &alphabet, n, t))
            .collect::<Result<_>>()?;
        let ratios: Vec<f64> = rows.iter().map(|r| r.bound_ratio.unwrap()).collect();
        let within = ratios.iter().filter(|&&r| r <= bound).count();
        let fraction = within as f64 / ratios.len() as f64;
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::new(
            format!("ratio_bound_n{n}"),
            fraction >= REQUIRED_FRACTION,
            format!("{within} of {} ratios <= {bound} (need {REQUIRED_FRACTION})", ratios.len()),
        ));
        summary.insert(format!("median_ratio_n{n}"), median(&ratios));
        summary.insert(format!("max_ratio_n{n}"), max);
        summary.insert(format!("fraction_within_n{n}"), fraction);
        records.extend(rows);
    }
    summary.insert("ratio_bound".into(), bound);
    Ok(ExperimentReport::new(cfg, records, vec![], summary, checks, started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpfq::quantize_neuron_first_layer;
    use crate::lab::Experiment;

    #[test]
    fn training_rows_are_controlled_by_final_state() {
        let mut rng = trial_rng(4, 0);
        let (m, n) = (6, 64);
        let x = gaussian_matrix(&mut rng, m, n, 1.0 / (m as f64).sqrt());
        let w = sample_weights(&mut rng, n, 0.05);
        let res = quantize_neuron_first_layer(&w, x.view(), &Alphabet::ternary()).unwrap();
        let diff: Array1<f64> = w.iter().zip(&res.q).map(|(a, b)| a - b).collect();
        for i in 0..m {
            let z = x.row(i);
            let e = z.dot(&diff).abs();
            assert!(e <= res.final_error * (1.0 + 1e-12));
        }
    }

    #[test]
    fn basis_spans_rows() {
        let mut rng = trial_rng(5, 0);
        let x = gaussian_matrix(&mut rng, 4, 40, 1.0);
        let v = row_space_basis(&x).unwrap();
        // VᵀV = I and every row of X lies in span(V).
        let gram = v.t().dot(&v);
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - target).abs() < 1e-12);
            }
        }
        let proj = x.dot(&v).dot(&v.t());
        assert!((&proj - &x).iter().all(|d| d.abs() < 1e-10));
    }

    #[test]
    fn rank_deficient_data_rejected() {
        let mut rng = trial_rng(6, 0);
        let mut x = gaussian_matrix(&mut rng, 3, 20, 1.0);
        let r0 = x.row(0).to_owned();
        x.row_mut(2).assign(&r0);
        assert!(matches!(row_space_basis(&x), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn orthogonal_direction_is_not_controlled() {
        // With X of rank 1 a direction orthogonal to its row sees the raw
        // weight error, which the training data cannot constrain.
        let x = Array2::from_shape_fn((1, 8), |(_, j)| if j < 4 { 1.0 } else { 0.0 });
        let w = [0.4; 8];
        let res = quantize_neuron_first_layer(&w, x.view(), &Alphabet::ternary()).unwrap();
        let z: Array1<f64> = (0..8).map(|j| if j < 4 { 0.0 } else { 1.0 }).collect();
        let diff: Array1<f64> = w.iter().zip(&res.q).map(|(a, b)| a - b).collect();
        assert!(res.final_error < 0.5);
        assert!(z.dot(&diff).abs() > 1.0);
    }

    #[test]
    fn small_experiment_runs() {
        let mut cfg = ExperimentConfig::default_for(Experiment::Generalize);
        cfg.m = 4;
        cfg.n_grid = vec![64];
        cfg.trials = 10;
        let r = generalization_experiment(&cfg).unwrap();
        assert_eq!(r.records.len(), 10);
        assert!(r.records.iter().all(|t| t.bound_ratio.unwrap().is_finite()));
    }
}
