use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::subspace::orthonormal_columns;
use super::{gaussian_matrix, gaussian_mlp, median, trial_rng};
use crate::error::{Error, Result};
use crate::network::{output_relative_error, quantize_network, DataBatch, QuantizeParams};

/// GPFQ against MSQ on random MLPs over a grid of radius multipliers.
///
/// Inputs are Gaussian on a random `intrinsic_dim`-dimensional subspace of
/// `R^input_dim`. Each seed draws a model, a calibration batch used for
/// quantization, a validation batch used to pick `C_α` and a test batch on
/// which the chosen setting is reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpStudy {
    pub input_dim: usize,
    pub intrinsic_dim: usize,
    pub widths: Vec<usize>,
    pub calibration: usize,
    pub validation: usize,
    pub test: usize,
    pub levels: usize,
    pub c_grid: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl MlpStudy {
    pub fn new(widths: &[usize]) -> Self {
        Self {
            input_dim: 256,
            intrinsic_dim: 16,
            widths: widths.to_vec(),
            calibration: 128,
            validation: 128,
            test: 256,
            levels: 3,
            c_grid: (1..=6).map(f64::from).collect(),
            seeds: (0..10).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    /// Median validation error for each entry of the grid.
    pub validation_medians: Vec<f64>,
    pub best_c: f64,
    /// Test errors per seed at `best_c`.
    pub test_errors: Vec<f64>,
    pub test_median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpStudyResult {
    pub study: MlpStudy,
    pub gpfq: MethodOutcome,
    pub msq: MethodOutcome,
    /// Seeds on which GPFQ's test error at its best `C_α` is at most MSQ's.
    pub gpfq_wins: usize,
}

/// Relative errors `[c][split]` (split 0 validation, 1 test) of one method.
type Grid = Vec<[f64; 2]>;

fn subspace_batch(rng: &mut rand_chacha::ChaCha8Rng, basis: &Array2<f64>, m: usize, scale: f64) -> Result<DataBatch> {
    let coeffs = gaussian_matrix(rng, m, basis.ncols(), scale);
    DataBatch::new(vec![basis.nrows()], coeffs.dot(&basis.t()).mapv(|v| v as f32))
}

fn run_seed(study: &MlpStudy, seed: u64) -> Result<(Grid, Grid)> {
    let mut rng = trial_rng(seed, 0);
    let model = gaussian_mlp(&mut rng, study.input_dim, &study.widths)?;
    let basis = orthonormal_columns(&gaussian_matrix(&mut rng, study.input_dim, study.intrinsic_dim, 1.0));
    // Scaled so that E‖x‖² = input_dim, as for isotropic unit Gaussians.
    let scale = (study.input_dim as f64 / study.intrinsic_dim as f64).sqrt();
    let calib = subspace_batch(&mut rng, &basis, study.calibration, scale)?;
    let val = subspace_batch(&mut rng, &basis, study.validation, scale)?;
    let test = subspace_batch(&mut rng, &basis, study.test, scale)?;
    let mut gpfq = Vec::new();
    let mut msq = Vec::new();
    for &c in &study.c_grid {
        for (params, out) in [
            (QuantizeParams::gpfq(study.levels, c), &mut gpfq),
            (QuantizeParams::msq(study.levels, c), &mut msq),
        ] {
            let (q, _) = quantize_network(&model, &calib, &params)?;
            out.push([
                output_relative_error(&model, &q, &val)?,
                output_relative_error(&model, &q, &test)?,
            ]);
        }
    }
    Ok((gpfq, msq))
}

fn outcome(study: &MlpStudy, grids: &[&Grid]) -> MethodOutcome {
    let validation_medians: Vec<f64> = (0..study.c_grid.len())
        .map(|k| median(&grids.iter().map(|g| g[k][0]).collect::<Vec<_>>()))
        .collect();
    // First minimum, so ties go to the smaller multiplier.
    let best = validation_medians
        .iter()
        .enumerate()
        .fold(0, |b, (k, &v)| if v < validation_medians[b] { k } else { b });
    let test_errors: Vec<f64> = grids.iter().map(|g| g[best][1]).collect();
    MethodOutcome {
        test_median: median(&test_errors),
        best_c: study.c_grid[best],
        validation_medians,
        test_errors,
    }
}

pub fn run_mlp_study(study: &MlpStudy) -> Result<MlpStudyResult> {
    if study.c_grid.is_empty() || study.seeds.is_empty() || study.widths.is_empty() {
        return Err(Error::InvalidConfig("mlp study needs widths, seeds and a C grid".into()));
    }
    if study.intrinsic_dim == 0 || study.intrinsic_dim > study.input_dim {
        return Err(Error::InvalidConfig(format!(
            "intrinsic dimension {} must lie in 1..={}",
            study.intrinsic_dim, study.input_dim
        )));
    }
    let runs: Vec<(Grid, Grid)> = study
        .seeds
        .par_iter()
        .map(|&s| run_seed(study, s))
        .collect::<Result<_>>()?;
    let gpfq = outcome(study, &runs.iter().map(|r| &r.0).collect::<Vec<_>>());
    let msq = outcome(study, &runs.iter().map(|r| &r.1).collect::<Vec<_>>());
    let gpfq_wins = gpfq
        .test_errors
        .iter()
        .zip(&msq.test_errors)
        .filter(|(g, m)| g <= m)
        .count();
    Ok(MlpStudyResult {
        study: study.clone(),
        gpfq,
        msq,
        gpfq_wins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_study_runs() {
        let mut s = MlpStudy::new(&[32, 8, 3]);
        s.input_dim = 16;
        s.intrinsic_dim = 4;
        s.calibration = 16;
        s.validation = 8;
        s.test = 8;
        s.c_grid = vec![1.0, 2.0];
        s.seeds = vec![0, 1];
        let r = run_mlp_study(&s).unwrap();
        assert_eq!(r.gpfq.validation_medians.len(), 2);
        assert_eq!(r.msq.test_errors.len(), 2);
        assert!(r.gpfq.test_median.is_finite());
        assert_eq!(run_mlp_study(&s).unwrap(), r);
    }
}
