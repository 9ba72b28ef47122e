//! Greedy path-following quantization of a single neuron.
//!
//! A neuron `w ∈ R^N` acting on data with columns `X_1, ..., X_N ∈ R^m` is
//! quantized one coordinate at a time. The state `u_t` is the running error
//! `Σ_{j≤t} (w_j X_j − q_j X_j)` and every step picks the alphabet element that
//! keeps it as short as possible:
//!
//! ```text
//! q_t = argmin_p ‖u_{t−1} + w_t X_t − p X_t‖²  =  Q(w_t + ⟨X_t, u_{t−1}⟩ / ‖X_t‖²)
//! u_t = u_{t−1} + (w_t − q_t) X_t
//! ```
//!
//! Hidden layers use the analog activations `Y` for the target and the
//! activations `Ỹ` of the already-quantized network for the codes:
//! `u_t = u_{t−1} + w_t Y_t − q_t Ỹ_t`.
//!
//! The state is always held in `f64`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};

/// Largest number of codes `exhaustive_optimal_quantize` will enumerate (3^12).
pub const EXHAUSTIVE_LIMIT: u128 = 531_441;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(u: &mut [f64], c: f64, x: &[f64]) {
    for (ui, xi) in u.iter_mut().zip(x) {
        *ui += c * xi;
    }
}

/// Running state of one neuron's quantization.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizationRunState {
    u: Vec<f64>,
    q: Vec<f64>,
}

impl QuantizationRunState {
    /// `u_0 = 0 ∈ R^m`.
    pub fn new(m: usize) -> Self {
        Self {
            u: vec![0.0; m],
            q: Vec::new(),
        }
    }

    /// Resumes from an arbitrary state `u` with no codes emitted yet.
    pub fn from_state(u: Vec<f64>) -> Self {
        Self { u, q: Vec::new() }
    }

    pub fn state(&self) -> &[f64] {
        &self.u
    }

    pub fn codes(&self) -> &[f64] {
        &self.q
    }

    /// Number of coordinates quantized so far.
    pub fn step_index(&self) -> usize {
        self.q.len()
    }

    pub fn state_norm_sq(&self) -> f64 {
        dot(&self.u, &self.u)
    }

    pub fn into_codes(self) -> Vec<f64> {
        self.q
    }

    /// One first-layer step with a precomputed `‖x_t‖²`.
    ///
    /// A zero column leaves the objective constant in `p`; the code falls
    /// back to `Q(w_t)` and `u` is unchanged.
    pub fn step_first_layer_with_norm(
        &mut self,
        w_t: f64,
        x_t: &[f64],
        norm_sq: f64,
        alphabet: &Alphabet,
    ) -> f64 {
        debug_assert_eq!(x_t.len(), self.u.len());
        let q_t = if norm_sq == 0.0 {
            alphabet.quantize(w_t)
        } else {
            let dither = dot(x_t, &self.u) / norm_sq;
            let q_t = alphabet.quantize(w_t + dither);
            let c = w_t - q_t;
            if c != 0.0 {
                axpy(&mut self.u, c, x_t);
            }
            q_t
        };
        self.q.push(q_t);
        q_t
    }

    pub fn step_first_layer(&mut self, w_t: f64, x_t: &[f64], alphabet: &Alphabet) -> f64 {
        let norm_sq = dot(x_t, x_t);
        self.step_first_layer_with_norm(w_t, x_t, norm_sq, alphabet)
    }

    /// One hidden-layer step. `cross` is `⟨ỹ_t, y_t⟩` and `norm_sq` is `‖ỹ_t‖²`.
    pub fn step_hidden_layer_with(
        &mut self,
        w_t: f64,
        y_t: &[f64],
        ytilde_t: &[f64],
        cross: f64,
        norm_sq: f64,
        alphabet: &Alphabet,
    ) -> f64 {
        debug_assert_eq!(y_t.len(), self.u.len());
        debug_assert_eq!(ytilde_t.len(), self.u.len());
        let q_t = if norm_sq == 0.0 {
            // Every p gives the same objective; take the memoryless choice.
            alphabet.quantize(w_t)
        } else {
            alphabet.quantize((dot(ytilde_t, &self.u) + w_t * cross) / norm_sq)
        };
        if w_t != 0.0 {
            axpy(&mut self.u, w_t, y_t);
        }
        if q_t != 0.0 {
            axpy(&mut self.u, -q_t, ytilde_t);
        }
        self.q.push(q_t);
        q_t
    }

    pub fn step_hidden_layer(
        &mut self,
        w_t: f64,
        y_t: &[f64],
        ytilde_t: &[f64],
        alphabet: &Alphabet,
    ) -> f64 {
        let cross = dot(ytilde_t, y_t);
        let norm_sq = dot(ytilde_t, ytilde_t);
        self.step_hidden_layer_with(w_t, y_t, ytilde_t, cross, norm_sq, alphabet)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronQuantizationResult {
    pub q: Vec<f64>,
    /// `‖u_N‖₂`.
    pub final_error: f64,
    /// `max_t ‖u_t‖₂`.
    pub trajectory_sup: f64,
    /// `‖u_t‖₂²` for `t = 0..=N`, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

struct Tracker {
    sup_sq: f64,
    trace: Option<Vec<f64>>,
}

impl Tracker {
    fn new(record: bool, n: usize) -> Self {
        let trace = record.then(|| {
            let mut v = Vec::with_capacity(n + 1);
            v.push(0.0);
            v
        });
        Self { sup_sq: 0.0, trace }
    }

    fn observe(&mut self, norm_sq: f64) {
        if norm_sq > self.sup_sq {
            self.sup_sq = norm_sq;
        }
        if let Some(t) = self.trace.as_mut() {
            t.push(norm_sq);
        }
    }

    fn finish(self, state: QuantizationRunState) -> NeuronQuantizationResult {
        let final_error = state.state_norm_sq().sqrt();
        NeuronQuantizationResult {
            q: state.into_codes(),
            final_error,
            trajectory_sup: self.sup_sq.sqrt(),
            trace: self.trace,
        }
    }
}

/// Data for the first-layer system, stored column-contiguously.
#[derive(Clone, Debug)]
pub struct FirstLayerData {
    /// Row `t` is the column `X_t` (shape `N × m`).
    columns: Array2<f64>,
    norms_sq: Vec<f64>,
}

impl FirstLayerData {
    /// `x` is the `m × N` data matrix whose rows are samples.
    pub fn from_matrix(x: ArrayView2<f64>) -> Self {
        Self::from_columns(x.t().as_standard_layout().into_owned())
    }

    /// `columns` is `N × m`; row `t` is `X_t`.
    pub fn from_columns(columns: Array2<f64>) -> Self {
        let columns = columns.as_standard_layout().into_owned();
        let norms_sq = columns
            .axis_iter(Axis(0))
            .map(|c| c.dot(&c))
            .collect();
        Self { columns, norms_sq }
    }

    pub fn samples(&self) -> usize {
        self.columns.ncols()
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn column(&self, t: usize) -> &[f64] {
        self.columns
            .row(t)
            .to_slice()
            .expect("standard layout")
    }

    pub fn column_norm_sq(&self, t: usize) -> f64 {
        self.norms_sq[t]
    }

    pub fn quantize(&self, w: &[f64], alphabet: &Alphabet) -> Result<NeuronQuantizationResult> {
        self.quantize_traced(w, alphabet, false)
    }

    pub fn quantize_traced(
        &self,
        w: &[f64],
        alphabet: &Alphabet,
        record_trace: bool,
    ) -> Result<NeuronQuantizationResult> {
        check_len("neuron length", self.dim(), w.len())?;
        let mut state = QuantizationRunState::new(self.samples());
        let mut tracker = Tracker::new(record_trace, w.len());
        for (t, &w_t) in w.iter().enumerate() {
            state.step_first_layer_with_norm(w_t, self.column(t), self.norms_sq[t], alphabet);
            tracker.observe(state.state_norm_sq());
        }
        Ok(tracker.finish(state))
    }

    /// Quantizes every column of `weights` (`N × n_out`), one neuron per column.
    /// Neurons run in parallel on the current rayon pool; the output does not
    /// depend on scheduling.
    pub fn quantize_layer(
        &self,
        weights: ArrayView2<f64>,
        alphabet: &Alphabet,
    ) -> Result<Vec<NeuronQuantizationResult>> {
        check_len("layer fan-in", self.dim(), weights.nrows())?;
        let neurons: Vec<Vec<f64>> = weights.columns().into_iter().map(|c| c.to_vec()).collect();
        neurons
            .par_iter()
            .map(|w| self.quantize(w, alphabet))
            .collect()
    }
}

/// Data for the hidden-layer system.
#[derive(Clone, Debug)]
pub struct HiddenLayerData {
    analog: Array2<f64>,
    quantized: Array2<f64>,
    cross: Vec<f64>,
    norms_sq: Vec<f64>,
}

impl HiddenLayerData {
    /// `y` and `ytilde` are `m × N` activation matrices (rows are samples).
    pub fn from_matrices(y: ArrayView2<f64>, ytilde: ArrayView2<f64>) -> Result<Self> {
        if y.dim() != ytilde.dim() {
            return Err(Error::Shape(format!(
                "analog activations {:?} and quantized activations {:?} differ in shape",
                y.dim(),
                ytilde.dim()
            )));
        }
        let analog = y.t().as_standard_layout().into_owned();
        let quantized = ytilde.t().as_standard_layout().into_owned();
        let cross = analog
            .axis_iter(Axis(0))
            .zip(quantized.axis_iter(Axis(0)))
            .map(|(a, b)| b.dot(&a))
            .collect();
        let norms_sq = quantized.axis_iter(Axis(0)).map(|c| c.dot(&c)).collect();
        Ok(Self {
            analog,
            quantized,
            cross,
            norms_sq,
        })
    }

    pub fn samples(&self) -> usize {
        self.analog.ncols()
    }

    pub fn dim(&self) -> usize {
        self.analog.nrows()
    }

    fn analog_col(&self, t: usize) -> &[f64] {
        self.analog.row(t).to_slice().expect("standard layout")
    }

    fn quantized_col(&self, t: usize) -> &[f64] {
        self.quantized.row(t).to_slice().expect("standard layout")
    }

    pub fn quantize(&self, w: &[f64], alphabet: &Alphabet) -> Result<NeuronQuantizationResult> {
        self.quantize_traced(w, alphabet, false)
    }

    pub fn quantize_traced(
        &self,
        w: &[f64],
        alphabet: &Alphabet,
        record_trace: bool,
    ) -> Result<NeuronQuantizationResult> {
        check_len("neuron length", self.dim(), w.len())?;
        let mut state = QuantizationRunState::new(self.samples());
        let mut tracker = Tracker::new(record_trace, w.len());
        for (t, &w_t) in w.iter().enumerate() {
            state.step_hidden_layer_with(
                w_t,
                self.analog_col(t),
                self.quantized_col(t),
                self.cross[t],
                self.norms_sq[t],
                alphabet,
            );
            tracker.observe(state.state_norm_sq());
        }
        Ok(tracker.finish(state))
    }

    pub fn quantize_layer(
        &self,
        weights: ArrayView2<f64>,
        alphabet: &Alphabet,
    ) -> Result<Vec<NeuronQuantizationResult>> {
        check_len("layer fan-in", self.dim(), weights.nrows())?;
        let neurons: Vec<Vec<f64>> = weights.columns().into_iter().map(|c| c.to_vec()).collect();
        neurons
            .par_iter()
            .map(|w| self.quantize(w, alphabet))
            .collect()
    }
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// First-layer quantization of `w` against the `m × N` data matrix `x`.
pub fn quantize_neuron_first_layer(
    w: &[f64],
    x: ArrayView2<f64>,
    alphabet: &Alphabet,
) -> Result<NeuronQuantizationResult> {
    check_len("neuron length", x.ncols(), w.len())?;
    FirstLayerData::from_matrix(x).quantize(w, alphabet)
}

/// Hidden-layer quantization of `w` given analog (`y`) and quantized-path
/// (`ytilde`) activations, both `m × N`.
pub fn quantize_neuron_hidden_layer(
    w: &[f64],
    y: ArrayView2<f64>,
    ytilde: ArrayView2<f64>,
    alphabet: &Alphabet,
) -> Result<NeuronQuantizationResult> {
    check_len("neuron length", y.ncols(), w.len())?;
    HiddenLayerData::from_matrices(y, ytilde)?.quantize(w, alphabet)
}

/// Memoryless scalar quantization: every entry rounded independently.
pub fn msq_quantize(weights: ArrayView2<f64>, alphabet: &Alphabet) -> Array2<f64> {
    weights.mapv(|v| alphabet.quantize(v))
}

pub fn msq_quantize_vec(w: &[f64], alphabet: &Alphabet) -> Vec<f64> {
    w.iter().map(|&v| alphabet.quantize(v)).collect()
}

/// `‖X w − X q‖₂` for an `m × N` matrix `x`.
pub fn residual_norm(x: ArrayView2<f64>, w: &[f64], q: &[f64]) -> f64 {
    let diff: Array1<f64> = w.iter().zip(q).map(|(a, b)| a - b).collect();
    let r = x.dot(&diff);
    r.dot(&r).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalQuantization {
    pub q: Vec<f64>,
    /// `min ‖Xw − Xq‖₂` over all codes.
    pub error: f64,
}

/// Global minimizer of `‖Xw − Xq‖₂²` over `q ∈ A^N` by full enumeration.
/// Codes are visited in lexicographic order of their element indices and the
/// first minimizer found is kept.
pub fn exhaustive_optimal_quantize(
    w: &[f64],
    x: ArrayView2<f64>,
    alphabet: &Alphabet,
) -> Result<OptimalQuantization> {
    let n = w.len();
    check_len("neuron length", x.ncols(), n)?;
    let levels = alphabet.levels();
    let count = (levels as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::InstanceTooLarge {
            count,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let target = x.dot(&ArrayView1::from(w));
    let cols: Vec<Array1<f64>> = x.columns().into_iter().map(|c| c.to_owned()).collect();
    let elems = alphabet.elements();

    let mut idx = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut r = Array1::<f64>::zeros(x.nrows());
    loop {
        r.assign(&target);
        for (t, &j) in idx.iter().enumerate() {
            r.scaled_add(-elems[j], &cols[t]);
        }
        let err = r.dot(&r);
        if best.as_ref().is_none_or(|(b, _)| err < *b) {
            best = Some((err, idx.clone()));
        }
        // Odometer with the first coordinate most significant.
        let mut pos = n;
        loop {
            if pos == 0 {
                let (err, code) = best.expect("at least one code");
                return Ok(OptimalQuantization {
                    q: code.iter().map(|&j| elems[j]).collect(),
                    error: err.sqrt(),
                });
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < levels {
                break;
            }
            idx[pos] = 0;
        }
    }
}
