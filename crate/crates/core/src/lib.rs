//! Greedy path-following quantization (GPFQ) of neural network weights.
//!
//! Each neuron is quantized one weight at a time while a running error
//! vector over the calibration samples is kept as short as possible, so
//! later weights correct the rounding of earlier ones.
//!
//! * [`alphabet`]: equispaced alphabets and scalar rounding.
//! * [`gpfq`]: the per-neuron quantizer, the memoryless baseline and an
//!   exhaustive oracle for tiny instances.
//! * [`network`]: dense and convolutional models, forward passes and
//!   layer-by-layer quantization.
//! * [`lab`]: seeded experiments on synthetic Gaussian data.
//! * [`io`]: model and data archives and reports.
//!
//! ```
//! use gpfq::{quantize_neuron_first_layer, Alphabet};
//! use ndarray::array;
//!
//! let x = array![[1.0, 1.0]];
//! let res = quantize_neuron_first_layer(&[0.6, 0.6], x.view(), &Alphabet::ternary()).unwrap();
//! assert_eq!(res.q, vec![1.0, 0.0]);
//! assert!((res.final_error - 0.2).abs() < 1e-12);
//! ```

pub mod alphabet;
pub mod cli;
pub mod error;
pub mod gpfq;
pub mod io;
pub mod lab;
pub mod network;

pub use alphabet::{build_alphabet, radius_from_weights, scalar_quantize, Alphabet};
pub use error::{Error, Result};
pub use gpfq::{
    exhaustive_optimal_quantize, msq_quantize, msq_quantize_vec, quantize_neuron_first_layer,
    quantize_neuron_hidden_layer, residual_norm, FirstLayerData, HiddenLayerData, NeuronQuantizationResult,
    OptimalQuantization, QuantizationRunState,
};
pub use network::{quantize_network, DataBatch, LayerSpec, NetworkModel, QuantizationReport, QuantizeParams};
