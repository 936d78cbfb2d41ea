use serde::{Deserialize, Serialize};

use crate::data::N_CHANNELS;
use crate::error::{Error, Result};

/// Architecture and optimizer hyperparameters of the CNN-LSTM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n_features: usize,
    pub conv_filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pool: usize,
    pub lstm_hidden: usize,
    pub dense_hidden: usize,
    /// Drop probability applied after every layer.
    pub dropout: f64,
    pub lr: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_features: N_CHANNELS,
            conv_filters: 64,
            kernel: 5,
            stride: 1,
            pool: 4,
            lstm_hidden: 70,
            dense_hidden: 64,
            dropout: 0.2,
            lr: 0.001,
        }
    }
}

impl ModelConfig {
    pub fn with_features(n_features: usize) -> Self {
        ModelConfig {
            n_features,
            ..Default::default()
        }
    }

    pub fn keep_prob(&self) -> f64 {
        1.0 - self.dropout
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_features", self.n_features),
            ("conv_filters", self.conv_filters),
            ("kernel", self.kernel),
            ("pool", self.pool),
            ("lstm_hidden", self.lstm_hidden),
            ("dense_hidden", self.dense_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be at least 1")));
        }
        if self.stride != 1 {
            return Err(Error::config("only stride 1 keeps one prediction per hour"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        Ok(())
    }

    /// Parameter counts per group: (conv, lstm, dense).
    pub fn param_counts(&self) -> (usize, usize, usize) {
        let conv = self.kernel * self.n_features * self.conv_filters + self.conv_filters;
        let h = self.lstm_hidden;
        let lstm = self.conv_filters * 4 * h + h * 4 * h + 4 * h;
        let dense = h * self.dense_hidden + self.dense_hidden + self.dense_hidden + 1;
        (conv, lstm, dense)
    }
}
