//! Feed-forward networks (dense and convolutional), forward passes, and
//! sequential layer-by-layer quantization.

pub mod forward;
pub mod im2col;
pub mod metrics;
pub mod model;
pub mod quantize;

pub use forward::{apply_layer, forward, Activations};
pub use im2col::{batch_im2col, conv_geometry, im2col, ConvGeometry};
pub use metrics::top_k_accuracy;
pub use model::{Activation, DataBatch, LayerSpec, NetworkModel, Padding};
pub use quantize::{
    embed_bias, layer_data_matrices, layer_errors, output_relative_error, quantize_network, LayerError,
    LayerReport, Method, QuantizationReport, QuantizeParams,
};
