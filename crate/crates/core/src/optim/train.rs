//! Mini-batch training with early stopping on validation loss.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::EpisodeTensor;
use crate::error::{Error, Result};
use crate::model::{CnnLstm, Mode};
use crate::nn::{Grads, ParamStore};
use crate::optim::adam::{adam_step, AdamState};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 200,
            patience: 15,
        }
    }
}

/// Tracks the best validation loss and the parameters that achieved it.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    pub patience: usize,
    pub best_loss: f64,
    pub best_params: ParamStore,
    pub best_epoch: usize,
    pub epochs_since_best: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize, initial: ParamStore) -> Self {
        EarlyStopper {
            patience,
            best_loss: f64::INFINITY,
            best_params: initial,
            best_epoch: 0,
            epochs_since_best: 0,
        }
    }

    /// Records one epoch; returns `true` once training should halt.
    pub fn observe(&mut self, epoch: usize, val_loss: f64, params: &ParamStore) -> bool {
        if val_loss < self.best_loss {
            self.best_loss = val_loss;
            self.best_params = params.clone();
            self.best_epoch = epoch;
            self.epochs_since_best = 0;
        } else {
            self.epochs_since_best += 1;
        }
        self.epochs_since_best >= self.patience
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{}", e.epoch, e.train_loss, e.val_loss);
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParamStore,
    pub trace: TrainTrace,
}

/// Mean inference-mode loss over a set of episodes, summed in input order.
pub fn mean_loss(net: &CnnLstm, params: &ParamStore, set: &[EpisodeTensor]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::usage("loss over an empty set"));
    }
    let losses: Vec<f64> = set
        .par_iter()
        .map(|e| net.loss(params, &e.values, e.outcome))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Batch-mean loss and gradients. Per-episode work may run in parallel; the
/// reduction is in batch order so results are bit-reproducible.
pub fn batch_gradients(
    net: &CnnLstm,
    params: &ParamStore,
    batch: &[&EpisodeTensor],
    dropout_seed: u64,
) -> Result<(f64, Grads)> {
    let parts: Vec<(f64, Grads)> = batch
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let mut r = rng::rng(rng::derive(dropout_seed, i as u64));
            net.loss_and_grads(params, &e.values, e.outcome, Mode::Train(&mut r))
        })
        .collect::<Result<_>>()?;
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.add_assign(g);
    }
    let k = 1.0 / parts.len() as f64;
    total.scale(k);
    Ok((loss * k, total))
}

/// Trains from `initial` (frozen flags respected) and returns the snapshot
/// with the smallest validation loss.
pub fn train_loop(
    net: &CnnLstm,
    initial: ParamStore,
    train: &[EpisodeTensor],
    val: &[EpisodeTensor],
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    train_loop_with(net, initial, train, val, config, seed, false)
}

/// As [`train_loop`]; with `keep_initial` the starting parameters compete as
/// the epoch-0 snapshot, so the result never validates worse than the start.
pub fn train_loop_with(
    net: &CnnLstm,
    initial: ParamStore,
    train: &[EpisodeTensor],
    val: &[EpisodeTensor],
    config: &TrainConfig,
    seed: u64,
    keep_initial: bool,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::usage("training set is empty"));
    }
    if val.is_empty() {
        return Err(Error::usage("validation set is empty"));
    }
    if config.batch_size == 0 || config.max_epochs == 0 {
        return Err(Error::config("batch_size and max_epochs must be positive"));
    }
    let train_ids: std::collections::HashSet<&str> =
        train.iter().map(|e| e.patient_id.as_str()).collect();
    if let Some(e) = val
        .iter()
        .find(|e| train_ids.contains(e.patient_id.as_str()))
    {
        return Err(Error::Leakage(format!(
            "patient {} is in both training and validation sets",
            e.patient_id
        )));
    }

    let mut params = initial;
    let mut state = AdamState::new(&params, net.config().lr);
    let mut stopper = EarlyStopper::new(config.patience, params.clone());
    if keep_initial {
        stopper.best_loss = mean_loss(net, &params, val)?;
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = rng::rng(seed);
    let mut trace = TrainTrace::default();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&EpisodeTensor> = chunk.iter().map(|&i| &train[i]).collect();
            let dropout_seed = shuffle_rng.random::<u64>();
            let (loss, grads) = batch_gradients(net, &params, &batch, dropout_seed)?;
            adam_step(&mut params, &grads, &mut state)?;
            epoch_loss += loss;
            batches += 1;
        }
        let val_loss = mean_loss(net, &params, val)?;
        trace.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / batches as f64,
            val_loss,
        });
        log::debug!(
            "epoch {epoch}: train {:.5} val {val_loss:.5}",
            epoch_loss / batches as f64
        );
        if stopper.observe(epoch, val_loss, &params) {
            break;
        }
    }
    trace.best_epoch = stopper.best_epoch;
    trace.best_val_loss = stopper.best_loss;
    Ok(TrainOutcome {
        params: stopper.best_params,
        trace,
    })
}
