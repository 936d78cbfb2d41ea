//! Differentiable layer primitives with explicit forward and backward passes.

pub mod activation;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod lstm;
pub mod params;
pub mod pool;

pub use activation::{selu, selu_backward, sigmoid, SELU_ALPHA, SELU_LAMBDA};
pub use conv::{conv1d_backward, conv1d_forward, ConvGrads};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use dropout::{dropout, dropout_backward, DropoutMask};
pub use lstm::{lstm_backward, lstm_forward, LstmCache, LstmGrads, LstmParams};
pub use params::{Grads, Group, ParamStore};
pub use pool::{maxpool1d, maxpool1d_backward, PoolOutput};
