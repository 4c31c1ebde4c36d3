//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] records operations as they are applied; [`Graph::backward`]
//! walks the tape in reverse and returns a [`GradientMap`]. The operation set
//! is deliberately small: matmul (plain and batched), elementwise add/mul,
//! sigmoid, tanh, relu, clamped log, masked softmax, concat, slices, sum,
//! mean, weighted pooling, layer normalisation, reshapes and a weighted
//! binary cross-entropy head. That is enough for an LSTM, a one-block
//! Transformer encoder, an autoencoder and a softmax gate.

mod functions;
mod gradcheck;
mod graph;
mod init;
mod kernels;
mod optim;
mod tensor;

pub use functions::{binary_entropy_clamp, softmax, weighted_binary_cross_entropy, LOG_EPS};
pub use gradcheck::{finite_difference_check, gradient_check};
pub use graph::{GradientMap, Graph, Var};
pub use init::{glorot_uniform, glorot_limit};
pub use optim::{Adam, AdamConfig};
pub use tensor::Tensor;
