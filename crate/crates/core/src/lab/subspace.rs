use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::{
    from_dmatrix, gaussian_matrix, median, sample_weights, to_dmatrix, trial_rng, Check, ExperimentConfig,
    ExperimentReport, TrialRecord,
};
use crate::alphabet::Alphabet;
use crate::error::Result;
use crate::gpfq::FirstLayerData;

/// Largest accepted ratio between median final errors at the two ambient dimensions.
pub const MEDIAN_ERROR_FACTOR: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceOutcome {
    /// Codes from the `m`-dimensional run on `X = Z A`.
    pub codes_full: Vec<f64>,
    /// Codes from the `d`-dimensional run on `A`.
    pub codes_reduced: Vec<f64>,
    pub final_error_full: f64,
    pub final_error_reduced: f64,
}

impl SubspaceOutcome {
    pub fn codes_match(&self) -> bool {
        self.codes_full == self.codes_reduced
    }
}

/// Runs the quantizer on `X = Z A` and on `A` directly. When `Zᵀ Z = I` the
/// state of the full run is `u_t = Z η_t`, so both runs emit the same codes.
pub fn subspace_trial(z: ArrayView2<f64>, a: ArrayView2<f64>, w: &[f64], alphabet: &Alphabet) -> Result<SubspaceOutcome> {
    let x = z.dot(&a);
    let full = FirstLayerData::from_matrix(x.view()).quantize(w, alphabet)?;
    let reduced = FirstLayerData::from_matrix(a).quantize(w, alphabet)?;
    Ok(SubspaceOutcome {
        codes_full: full.q,
        codes_reduced: reduced.q,
        final_error_full: full.final_error,
        final_error_reduced: reduced.final_error,
    })
}

/// Orthonormal basis of the column space of `g` (`m × d`, full column rank),
/// from its thin QR factorization.
pub fn orthonormal_columns(g: &Array2<f64>) -> Array2<f64> {
    let q = to_dmatrix(g).qr().q();
    from_dmatrix(&q)
}

fn run_trial(cfg: &ExperimentConfig, alphabet: &Alphabet, m: usize, d: usize, n: usize, stream: u64, trial: usize) -> Result<(TrialRecord, bool)> {
    let sigma = cfg.sigma.unwrap_or(1.0 / (d as f64).sqrt());
    let mut rng = trial_rng(cfg.seed, stream);
    let z = orthonormal_columns(&gaussian_matrix(&mut rng, m, d, 1.0));
    let a = gaussian_matrix(&mut rng, d, n, sigma);
    let w = sample_weights(&mut rng, n, cfg.epsilon);
    let out = subspace_trial(z.view(), a.view(), &w, alphabet)?;
    let matched = out.codes_match();
    Ok((
        TrialRecord {
            label: Some(format!("m={m}")),
            n,
            trial,
            final_error: Some(out.final_error_full),
            ..Default::default()
        },
        matched,
    ))
}

/// Data drawn from a `d`-dimensional subspace of `R^m`: checks that the
/// `m`-dimensional and reduced runs agree code for code and that the error
/// depends on `d` rather than `m`.
pub fn subspace_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let alphabet = cfg.alphabet()?;
    let d = cfg.d.expect("validated");
    let n = cfg.n_grid[0];
    let mut ms = vec![cfg.m];
    ms.extend(cfg.alt_m);

    let mut records = Vec::new();
    let mut medians = Vec::new();
    let mut mismatches = 0;
    let mut summary = BTreeMap::new();
    for (k, &m) in ms.iter().enumerate() {
        let rows: Vec<(TrialRecord, bool)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, &alphabet, m, d, n, ((k as u64) << 32) | t as u64, t))
            .collect::<Result<_>>()?;
        mismatches += rows.iter().filter(|(_, ok)| !ok).count();
        let errors: Vec<f64> = rows.iter().map(|(r, _)| r.final_error.unwrap()).collect();
        let med = median(&errors);
        summary.insert(format!("median_final_error_m{m}"), med);
        medians.push(med);
        records.extend(rows.into_iter().map(|(r, _)| r));
    }

    let mut checks = vec![Check::new(
        "reduced_codes_identical",
        mismatches == 0,
        format!("{mismatches} of {} trials differ", records.len()),
    )];
    if medians.len() == 2 {
        let ratio = medians[0].max(medians[1]) / medians[0].min(medians[1]);
        summary.insert("median_error_ratio".into(), ratio);
        checks.push(Check::new(
            "median_error_independent_of_m",
            ratio <= MEDIAN_ERROR_FACTOR,
            format!("median ratio {ratio:.4} <= {MEDIAN_ERROR_FACTOR}"),
        ));
    }
    summary.insert("d".into(), d as f64);
    Ok(ExperimentReport::new(cfg, records, vec![], summary, checks, started))
}
