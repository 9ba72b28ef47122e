//! Seeded experiments that check the quantizer's error behavior on synthetic
//! Gaussian data.
//!
//! Every trial draws from its own ChaCha stream derived from
//! `(seed, stream index)`, so trials may run in any order or in parallel and
//! still reproduce bit-for-bit. Aggregates are always formed in trial order.

mod decay;
mod fit;
mod generalize;
mod increments;
mod levelsets;
mod mlp;
mod pilot;
mod special;
mod subspace;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::network::{Activation, DataBatch, LayerSpec, NetworkModel};

pub use decay::{relative_error_decay_experiment, GPFQ_SLOPE_WINDOW, MSQ_SLOPE_WINDOW, STABILITY_MAX_FRACTION};
pub use fit::{fit_decay_slope, SlopeFit};
pub use generalize::{REQUIRED_FRACTION, generalization_bound, generalization_experiment, generalization_trial, GeneralizationTrial};
pub use increments::{default_alpha_grid, increment_survival_check, predicted_survival, IncrementSurvival, SurvivalPoint};
pub use levelsets::{level_set_check, LevelSetRegime, LevelSetSummary};
pub use mlp::{run_mlp_study, MethodOutcome, MlpStudy, MlpStudyResult};
pub use pilot::{pilot_constants, PilotConstants};
pub use special::{adversarial_case, sigma_delta_case, special_case_suite, AdversarialOutcome, ADVERSARIAL_TOLERANCE};
pub use subspace::{orthonormal_columns, subspace_experiment, subspace_trial, SubspaceOutcome, MEDIAN_ERROR_FACTOR};

pub const EXPERIMENT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Decay,
    Generalize,
    Subspace,
    Levelsets,
    Increments,
    Special,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Decay,
        Experiment::Generalize,
        Experiment::Subspace,
        Experiment::Levelsets,
        Experiment::Increments,
        Experiment::Special,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Decay => "decay",
            Experiment::Generalize => "generalize",
            Experiment::Subspace => "subspace",
            Experiment::Levelsets => "levelsets",
            Experiment::Increments => "increments",
            Experiment::Special => "special",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment `{s}`")))
    }
}

/// Parameters of one experiment run. Fields that an experiment does not use
/// are ignored by it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Number of samples (rows of the data matrix).
    pub m: usize,
    /// Neuron lengths `N₀`.
    pub n_grid: Vec<usize>,
    /// Subspace dimension.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub d: Option<usize>,
    /// Second sample count compared against `m` in the subspace experiment.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alt_m: Option<usize>,
    /// Column standard deviation; `None` picks the experiment default
    /// (`1/√m`, or `1/√d` for subspace data).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
    /// Standard deviation of `g` in `z = V g`; `None` means `σ √(N/m)`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma_z: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub levels: usize,
    pub radius: f64,
    /// Weights are kept farther than this from `{-1, 0, 1}`.
    pub epsilon: f64,
    /// Monte Carlo samples per weight value (increments).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<usize>,
    /// Weight values probed by the increments experiment.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub w_values: Vec<f64>,
    /// Bound on the generalization ratio; `None` uses the pilot fixture.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ratio_bound: Option<f64>,
}

impl ExperimentConfig {
    /// Default configuration of each experiment.
    pub fn default_for(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            m: 20,
            n_grid: vec![],
            d: None,
            alt_m: None,
            sigma: None,
            sigma_z: None,
            trials: 50,
            seed: 0,
            levels: 3,
            radius: 1.0,
            epsilon: 0.05,
            samples: None,
            w_values: vec![],
            ratio_bound: None,
        };
        match experiment {
            Experiment::Decay => Self {
                n_grid: (7..=13).map(|k| 1usize << k).collect(),
                ..base
            },
            Experiment::Generalize => Self {
                m: 16,
                n_grid: vec![1024],
                trials: 200,
                ..base
            },
            Experiment::Subspace => Self {
                m: 64,
                alt_m: Some(256),
                d: Some(8),
                n_grid: vec![2048],
                trials: 100,
                ..base
            },
            Experiment::Levelsets => Self {
                m: 8,
                trials: 10_000,
                ..base
            },
            Experiment::Increments => Self {
                m: 8,
                trials: 1,
                samples: Some(50_000),
                w_values: vec![0.3, -0.3, 0.7, -0.7],
                ..base
            },
            Experiment::Special => Self {
                m: 16,
                n_grid: vec![1000],
                trials: 100,
                ..base
            },
        }
    }

    pub fn alphabet(&self) -> Result<Alphabet> {
        Alphabet::new(self.levels, self.radius)
    }

    pub fn sigma_or_default(&self) -> f64 {
        self.sigma.unwrap_or(1.0 / (self.m as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.m == 0 {
            return bad("m must be positive".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad(format!("epsilon must lie in (0, 1/2), got {}", self.epsilon));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("sigma must be positive, got {s}"));
            }
        }
        self.alphabet()?;
        let needs_grid = matches!(
            self.experiment,
            Experiment::Decay | Experiment::Generalize | Experiment::Subspace | Experiment::Special
        );
        if needs_grid && self.n_grid.is_empty() {
            return bad("n_grid must not be empty".into());
        }
        match self.experiment {
            Experiment::Decay => {
                if let Some(&n) = self.n_grid.iter().find(|&&n| n < self.m) {
                    return bad(format!("decay needs every N >= m = {}, got N = {n}", self.m));
                }
                if self.n_grid.len() < 3 {
                    return bad("decay needs at least three grid points to fit a slope".into());
                }
            }
            Experiment::Generalize => {
                if let Some(&n) = self.n_grid.iter().find(|&&n| n < 4 * self.m) {
                    return bad(format!("generalize needs N >= 4m = {}, got N = {n}", 4 * self.m));
                }
            }
            Experiment::Subspace => {
                let d = self.d.ok_or_else(|| Error::InvalidConfig("subspace needs d".into()))?;
                if d == 0 || d > self.m || self.alt_m.is_some_and(|a| d > a) {
                    return bad(format!("subspace needs 0 < d <= m, got d = {d}"));
                }
            }
            Experiment::Increments => {
                if self.m < 1 || self.samples.unwrap_or(0) == 0 {
                    return bad("increments needs samples > 0".into());
                }
                if let Some(w) = self.w_values.iter().find(|w| !(w.abs() > 0.0 && w.abs() < 1.0)) {
                    return bad(format!("increments needs 0 < |w| < 1, got {w}"));
                }
            }
            Experiment::Special => {
                if self.m < 2 {
                    return bad("special needs m >= 2 to build orthogonal columns".into());
                }
            }
            Experiment::Levelsets => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// One row of raw per-trial data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<String>,
    pub n: usize,
    pub trial: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relative_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trajectory_sup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub msq_relative_error: Option<f64>,
    /// `|zᵀ(w − q)|` for the generalization experiment.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generalization_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bound_ratio: Option<f64>,
    /// Largest `Δ‖u_t‖² / (B/4)` over the trajectory.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub increment_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub median_relative_error: f64,
    pub median_msq_relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub curve: Vec<CurvePoint>,
    pub summary: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_ms: Option<f64>,
}

impl ExperimentReport {
    pub(crate) fn new(
        config: &ExperimentConfig,
        records: Vec<TrialRecord>,
        curve: Vec<CurvePoint>,
        summary: BTreeMap<String, f64>,
        checks: Vec<Check>,
        started: std::time::Instant,
    ) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            schema_version: EXPERIMENT_SCHEMA_VERSION,
            experiment: config.experiment,
            config: config.clone(),
            records,
            curve,
            summary,
            checks,
            passed,
            wall_clock_ms: Some(started.elapsed().as_secs_f64() * 1e3),
        }
    }

    pub fn without_timing(mut self) -> Self {
        self.wall_clock_ms = None;
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs the experiment named in `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    match config.experiment {
        Experiment::Decay => relative_error_decay_experiment(config),
        Experiment::Generalize => generalization_experiment(config),
        Experiment::Subspace => subspace_experiment(config),
        Experiment::Levelsets => levelsets::level_set_experiment(config),
        Experiment::Increments => increments::increments_experiment(config),
        Experiment::Special => special::special_experiment(config),
    }
}

/// Independent random stream for one trial.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `rows × cols` matrix with i.i.d. `N(0, σ²)` entries, filled row by row.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, sigma: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let g: f64 = StandardNormal.sample(rng);
        sigma * g
    })
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, sigma: f64) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            sigma * g
        })
        .collect()
}

/// Uniform weights on `[-1, 1]`, rejection-sampled so that every entry is
/// farther than `epsilon` from `{-1, 0, 1}`.
pub fn sample_weights<R: Rng + ?Sized>(rng: &mut R, n: usize, epsilon: f64) -> Vec<f64> {
    (0..n)
        .map(|_| loop {
            let w: f64 = rng.random_range(-1.0..=1.0);
            let a = w.abs();
            if a.min(1.0 - a) > epsilon {
                break w;
            }
        })
        .collect()
}

/// Random MLP with `N(0, 1/fan_in)` weights and biases, ReLU between
/// layers and a linear output layer.
pub fn gaussian_mlp<R: Rng + ?Sized>(rng: &mut R, input_dim: usize, widths: &[usize]) -> Result<NetworkModel> {
    let mut layers = Vec::new();
    let mut fan_in = input_dim;
    for (i, &width) in widths.iter().enumerate() {
        let sigma = 1.0 / (fan_in as f64).sqrt();
        let w = gaussian_matrix(rng, fan_in, width, sigma).mapv(|v| v as f32);
        let b = Array1::from(gaussian_vector(rng, width, sigma)).mapv(|v| v as f32);
        layers.push(LayerSpec::dense(w, b));
        if i + 1 < widths.len() {
            layers.push(LayerSpec::Activation(Activation::Relu));
        }
        fan_in = width;
    }
    NetworkModel::new("gaussian-mlp", vec![input_dim], layers)
}

/// `m` samples of i.i.d. standard Gaussian inputs of the given shape.
pub fn gaussian_batch<R: Rng + ?Sized>(rng: &mut R, m: usize, shape: &[usize]) -> Result<DataBatch> {
    let numel = shape.iter().product();
    DataBatch::new(shape.to_vec(), gaussian_matrix(rng, m, numel, 1.0).mapv(|v| v as f32))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub(crate) fn to_dmatrix(a: &Array2<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_dmatrix(a: &nalgebra::DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_respect_margin() {
        let mut rng = trial_rng(1, 0);
        let w = sample_weights(&mut rng, 10_000, 0.05);
        assert!(w.iter().all(|&v| (-1.0..=1.0).contains(&v)));
        assert!(w.iter().all(|&v| v.abs() > 0.05 && 1.0 - v.abs() > 0.05));
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = gaussian_vector(&mut trial_rng(7, 3), 5, 1.0);
        let b = gaussian_vector(&mut trial_rng(7, 3), 5, 1.0);
        let c = gaussian_vector(&mut trial_rng(7, 4), 5, 1.0);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::default_for(Experiment::Decay);
        assert!(c.validate().is_ok());
        c.n_grid = vec![8, 16, 32];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default_for(Experiment::Subspace);
        c.d = Some(100);
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default_for(Experiment::Generalize);
        c.n_grid = vec![32];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default_for(Experiment::Levelsets);
        c.epsilon = 0.5;
        assert!(c.validate().is_err());
        assert!("nope".parse::<Experiment>().is_err());
        assert_eq!("special".parse::<Experiment>().unwrap(), Experiment::Special);
    }

    #[test]
    fn gaussian_mlp_composes() {
        let mut rng = trial_rng(0, 0);
        let m = gaussian_mlp(&mut rng, 12, &[8, 4, 3]).unwrap();
        assert_eq!(m.layers.len(), 5);
        assert_eq!(m.output_shape().unwrap(), vec![3]);
        let b = gaussian_batch(&mut rng, 5, &[12]).unwrap();
        assert_eq!(b.samples(), 5);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
