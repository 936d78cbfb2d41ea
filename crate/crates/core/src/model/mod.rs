//! CNN-LSTM assembly, per-hour prediction and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod network;

pub use checkpoint::{Checkpoint, CheckpointMeta};
pub use config::ModelConfig;
pub use network::{build_model, init_group, CnnLstm, DynamicPrediction, ForwardPass, Mode};
