use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::{gaussian_vector, sample_weights, trial_rng, Check, ExperimentConfig, ExperimentReport, TrialRecord};
use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::gpfq::{dot, msq_quantize_vec, QuantizationRunState};

/// Relative tolerance on `‖u_t‖² = Σ_{j≤t} (w_j − q_j)²` in the orthogonal case.
pub const ADVERSARIAL_TOLERANCE: f64 = 1e-9;

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Every column equal to one unit vector `e`: the quantizer reduces to a
/// first order Σ∆ scheme on `w`. Returns `max_t ‖u_t‖₂`.
pub fn sigma_delta_case(w: &[f64], e: &[f64], alphabet: &Alphabet) -> f64 {
    let mut state = QuantizationRunState::new(e.len());
    let norm_sq = dot(e, e);
    let mut sup: f64 = 0.0;
    for &w_t in w {
        state.step_first_layer_with_norm(w_t, e, norm_sq, alphabet);
        sup = sup.max(state.state_norm_sq());
    }
    sup.sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdversarialOutcome {
    pub q: Vec<f64>,
    pub msq: Vec<f64>,
    /// `‖u_t‖²` for `t = 1..=N`.
    pub norms_sq: Vec<f64>,
    /// Largest `|‖u_t‖² − Σ_{j≤t}(w_j − q_j)²| / max(Σ, 1e-300)`.
    pub max_relative_deviation: f64,
}

impl AdversarialOutcome {
    pub fn codes_match(&self) -> bool {
        self.q == self.msq
    }

    pub fn passed(&self) -> bool {
        self.codes_match() && self.max_relative_deviation <= ADVERSARIAL_TOLERANCE
    }
}

/// Builds each unit column `X_t` orthogonal to `u_{t−1}`, so the step sees
/// no dither and emits the memoryless code. Needs `m ≥ 2`.
pub fn adversarial_case<R: Rng + ?Sized>(rng: &mut R, w: &[f64], m: usize, alphabet: &Alphabet) -> Result<AdversarialOutcome> {
    if m < 2 {
        return Err(Error::InvalidConfig("orthogonal columns need m >= 2".into()));
    }
    let mut state = QuantizationRunState::new(m);
    let mut norms_sq = Vec::with_capacity(w.len());
    let mut expected = 0.0;
    let mut worst: f64 = 0.0;
    for &w_t in w {
        let mut x = gaussian_vector(rng, m, 1.0);
        let u = state.state();
        let uu = dot(u, u);
        if uu > 0.0 {
            let c = dot(&x, u) / uu;
            x.iter_mut().zip(u).for_each(|(xi, ui)| *xi -= c * ui);
        }
        let x = unit(x);
        let q = state.step_first_layer(w_t, &x, alphabet);
        expected += (w_t - q) * (w_t - q);
        let got = state.state_norm_sq();
        norms_sq.push(got);
        worst = worst.max((got - expected).abs() / expected.max(1e-300));
    }
    Ok(AdversarialOutcome {
        q: state.into_codes(),
        msq: msq_quantize_vec(w, alphabet),
        norms_sq,
        max_relative_deviation: worst,
    })
}

/// Runs the Σ∆ and orthogonal cases with the default configuration.
pub fn special_case_suite(seed: u64) -> Result<ExperimentReport> {
    let mut cfg = ExperimentConfig::default_for(super::Experiment::Special);
    cfg.seed = seed;
    special_experiment(&cfg)
}

struct SpecialTrial {
    sigma_delta: TrialRecord,
    adversarial: TrialRecord,
    adversarial_ok: bool,
}

fn run_trial(cfg: &ExperimentConfig, alphabet: &Alphabet, n: usize, trial: usize) -> Result<SpecialTrial> {
    let mut rng = trial_rng(cfg.seed, trial as u64);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let e = unit(gaussian_vector(&mut rng, cfg.m, 1.0));
    let sd = sigma_delta_case(&w, &e, alphabet);

    let w = sample_weights(&mut rng, n, cfg.epsilon);
    let adv = adversarial_case(&mut rng, &w, cfg.m, alphabet)?;
    let last = *adv.norms_sq.last().unwrap_or(&0.0);
    let sup = adv.norms_sq.iter().copied().fold(0.0, f64::max);
    Ok(SpecialTrial {
        sigma_delta: TrialRecord {
            label: Some("sigma_delta".into()),
            n,
            trial,
            trajectory_sup: Some(sd),
            ..Default::default()
        },
        adversarial: TrialRecord {
            label: Some("adversarial".into()),
            n,
            trial,
            final_error: Some(last.sqrt()),
            trajectory_sup: Some(sup.sqrt()),
            ..Default::default()
        },
        adversarial_ok: adv.passed(),
    })
}

pub(crate) fn special_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let alphabet = cfg.alphabet()?;
    let n = cfg.n_grid[0];
    let trials: Vec<SpecialTrial> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &alphabet, n, t))
        .collect::<Result<_>>()?;

    let sd_max = trials
        .iter()
        .map(|t| t.sigma_delta.trajectory_sup.unwrap())
        .fold(0.0, f64::max);
    let adv_failures = trials.iter().filter(|t| !t.adversarial_ok).count();
    let half = alphabet.radius() / 2.0;

    // Constant weights just below the first threshold: every step adds the
    // same (w − q)² to ‖u‖².
    let w_const = 0.5 * alphabet.radius() - 0.01;
    let fixture = adversarial_case(&mut trial_rng(cfg.seed, u64::MAX), &vec![w_const; n], cfg.m, &alphabet)?;
    let q0 = alphabet.quantize(w_const);
    let closed_form = n as f64 * (w_const - q0) * (w_const - q0);
    let got = *fixture.norms_sq.last().unwrap_or(&0.0);
    let fixture_dev = (got - closed_form).abs() / closed_form;

    let checks = vec![
        Check::new(
            "sigma_delta_bounded",
            sd_max <= half,
            format!("max_t ‖u_t‖ = {sd_max:.6} over {} trials, bound {half}", trials.len()),
        ),
        Check::new(
            "adversarial_matches_msq",
            adv_failures == 0,
            format!("{adv_failures} of {} trials differ from MSQ or the norm identity", trials.len()),
        ),
        Check::new(
            "adversarial_constant_weights",
            fixture_dev <= ADVERSARIAL_TOLERANCE && fixture.codes_match(),
            format!("‖u_N‖² = {got:.9} vs N(w − q)² = {closed_form:.9}"),
        ),
    ];
    let mut summary = BTreeMap::new();
    summary.insert("sigma_delta_max_norm".into(), sd_max);
    summary.insert("adversarial_failures".into(), adv_failures as f64);
    summary.insert("constant_weight_deviation".into(), fixture_dev);
    let records = trials
        .into_iter()
        .flat_map(|t| [t.sigma_delta, t.adversarial])
        .collect();
    Ok(ExperimentReport::new(cfg, records, vec![], summary, checks, started))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_delta_small() {
        let a = Alphabet::ternary();
        // Scalar recursion: u = 0.4, −0.2, 0.2, −0.4.
        let sup = sigma_delta_case(&[0.4, 0.4, 0.4, 0.4], &[0.0, 1.0], &a);
        assert!((sup - 0.4).abs() < 1e-15);
        let mut rng = trial_rng(1, 0);
        let w: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..=1.0)).collect();
        assert!(sigma_delta_case(&w, &unit(vec![1.0, 2.0, -0.5]), &a) <= 0.5);
    }

    #[test]
    fn adversarial_constant() {
        let a = Alphabet::ternary();
        let out = adversarial_case(&mut trial_rng(2, 0), &[0.49; 50], 3, &a).unwrap();
        assert!(out.codes_match());
        assert!(out.q.iter().all(|&q| q == 0.0));
        let last = *out.norms_sq.last().unwrap();
        assert!((last - 50.0 * 0.49 * 0.49).abs() < 1e-9 * last);
    }

    #[test]
    fn adversarial_needs_two_dims() {
        assert!(adversarial_case(&mut trial_rng(0, 0), &[0.3], 1, &Alphabet::ternary()).is_err());
    }

    #[test]
    fn suite_passes() {
        let mut cfg = ExperimentConfig::default_for(super::super::Experiment::Special);
        cfg.trials = 5;
        cfg.n_grid = vec![200];
        let r = special_experiment(&cfg).unwrap();
        assert!(r.passed, "{:?}", r.checks);
        assert_eq!(r.records.len(), 10);
    }
}
