//! Per-hour ICU mortality prediction with a from-scratch CNN-LSTM and
//! layer-freezing transfer across ICU domains, plus the evaluation harness
//! around it: preprocessing, cross-validated AUC, dynamic prediction curves,
//! t-SNE risk spaces and Shapley attributions.

pub mod attribution;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod nn;
pub mod optim;
pub mod riskspace;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod transfer;

pub use error::{Error, Result};
pub use tensor::Tensor;
