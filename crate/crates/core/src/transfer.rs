//! Layer-freezing transfer: pretrain on source domains, then fine-tune on the
//! target domain with per-group freezing and reinitialization.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Domain, EpisodeTensor};
use crate::error::{Error, Result};
use crate::model::{init_group, CnnLstm};
use crate::nn::{Group, ParamStore};
use crate::optim::{
    adam_step, batch_gradients, train_loop, train_loop_with, AdamState, TrainConfig, TrainOutcome,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    A1,
    A2,
    A3,
    A4,
    A5,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::A1,
        Strategy::A2,
        Strategy::A3,
        Strategy::A4,
        Strategy::A5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::A1 => "A1",
            Strategy::A2 => "A2",
            Strategy::A3 => "A3",
            Strategy::A4 => "A4",
            Strategy::A5 => "A5",
        }
    }

    pub fn plan(self) -> TransferPlan {
        TransferPlan::for_strategy(self)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::config(format!("unknown strategy {s:?} (expected A1..A5)")))
    }
}

/// Parses a comma-separated list such as `A1,A3` or the word `all`.
pub fn parse_strategies(s: &str) -> Result<Vec<Strategy>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Strategy::ALL.to_vec());
    }
    let mut out: Vec<Strategy> = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let st: Strategy = part.parse()?;
        if !out.contains(&st) {
            out.push(st);
        }
    }
    if out.is_empty() {
        return Err(Error::config("no strategies given"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferPlan {
    pub strategy: Strategy,
    pub frozen: BTreeSet<Group>,
    pub reinit: BTreeSet<Group>,
}

impl TransferPlan {
    pub fn for_strategy(strategy: Strategy) -> Self {
        use Group::*;
        let (frozen, reinit): (&[Group], &[Group]) = match strategy {
            Strategy::A1 => (&[], &[]),
            Strategy::A2 => (&[Conv], &[]),
            Strategy::A3 => (&[Conv, Lstm], &[]),
            Strategy::A4 => (&[Conv], &[Lstm, Dense]),
            Strategy::A5 => (&[Conv, Lstm], &[Dense]),
        };
        TransferPlan {
            strategy,
            frozen: frozen.iter().copied().collect(),
            reinit: reinit.iter().copied().collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.frozen.intersection(&self.reinit).next() {
            return Err(Error::config(format!(
                "group {g} is both frozen and reinitialized"
            )));
        }
        Ok(())
    }
}

/// Pretrains on pooled source data. Any episode from the target domain, or
/// whose id is listed in `target_ids`, is a leakage error.
pub fn pretrain_source(
    net: &CnnLstm,
    initial: ParamStore,
    train: &[EpisodeTensor],
    val: &[EpisodeTensor],
    target: Domain,
    target_ids: &HashSet<String>,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    for e in train.iter().chain(val) {
        if e.domain == target || target_ids.contains(&e.patient_id) {
            return Err(Error::Leakage(format!(
                "target patient {} ({}) found in source pool",
                e.patient_id, e.domain
            )));
        }
    }
    train_loop(net, initial, train, val, config, seed)
}

/// Copies `pretrained`, reinitializes the plan's groups from a stream derived
/// from `seed`, and sets frozen flags.
pub fn apply_plan(
    net: &CnnLstm,
    pretrained: &ParamStore,
    plan: &TransferPlan,
    seed: u64,
) -> Result<ParamStore> {
    plan.validate()?;
    for g in Group::ALL {
        if pretrained.group_n_params(g) == 0 {
            return Err(Error::usage(format!(
                "pretrained parameters lack the {g} group"
            )));
        }
    }
    let mut out = pretrained.clone();
    let reinit_seed = rng::derive_str(seed, "reinit");
    for &g in &plan.reinit {
        for (name, t) in init_group(net.config(), g, reinit_seed) {
            out.replace(name, t)?;
        }
    }
    for g in Group::ALL {
        out.set_frozen(g, plan.frozen.contains(&g));
    }
    Ok(out)
}

/// Early-stopped training on the target split with a fresh optimizer state.
/// The prepared parameters count as the epoch-0 candidate.
pub fn fine_tune(
    net: &CnnLstm,
    prepared: ParamStore,
    train: &[EpisodeTensor],
    val: &[EpisodeTensor],
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::usage(
            "fine-tuning needs non-empty target train and validation splits",
        ));
    }
    train_loop_with(net, prepared, train, val, config, seed, true)
}

/// A fixed number of optimizer steps on shuffled mini-batches, without early
/// stopping.
pub fn fine_tune_steps(
    net: &CnnLstm,
    prepared: ParamStore,
    train: &[EpisodeTensor],
    steps: usize,
    batch_size: usize,
    seed: u64,
) -> Result<ParamStore> {
    if train.is_empty() || batch_size == 0 {
        return Err(Error::usage(
            "fine-tuning needs a non-empty training split and batch size",
        ));
    }
    let mut params = prepared;
    let mut state = AdamState::new(&params, net.config().lr);
    let mut r = rng::rng(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut pos = order.len();
    for _ in 0..steps {
        if pos + batch_size > order.len() {
            order.shuffle(&mut r);
            pos = 0;
        }
        let end = (pos + batch_size).min(order.len());
        let batch: Vec<&EpisodeTensor> = order[pos..end].iter().map(|&i| &train[i]).collect();
        pos = end;
        let (_, grads) = batch_gradients(net, &params, &batch, r.random())?;
        adam_step(&mut params, &grads, &mut state)?;
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelConfig};

    fn small() -> (ParamStore, CnnLstm) {
        let mut c = ModelConfig::with_features(3);
        c.conv_filters = 4;
        c.lstm_hidden = 3;
        c.dense_hidden = 2;
        build_model(&c, 11).unwrap()
    }

    #[test]
    fn plan_table() {
        use Group::*;
        let expect: [(&[Group], &[Group]); 5] = [
            (&[], &[]),
            (&[Conv], &[]),
            (&[Conv, Lstm], &[]),
            (&[Conv], &[Lstm, Dense]),
            (&[Conv, Lstm], &[Dense]),
        ];
        for (s, (f, r)) in Strategy::ALL.iter().zip(expect) {
            let p = s.plan();
            assert_eq!(p.frozen, f.iter().copied().collect());
            assert_eq!(p.reinit, r.iter().copied().collect());
            p.validate().unwrap();
        }
    }

    #[test]
    fn unknown_strategy() {
        assert!(matches!("A6".parse::<Strategy>(), Err(Error::Config(_))));
        assert_eq!("a3".parse::<Strategy>().unwrap(), Strategy::A3);
        assert_eq!(
            parse_strategies("A1, A5").unwrap(),
            vec![Strategy::A1, Strategy::A5]
        );
        assert_eq!(parse_strategies("all").unwrap().len(), 5);
    }

    #[test]
    fn a1_copies_everything() {
        let (p, net) = small();
        let out = apply_plan(&net, &p, &Strategy::A1.plan(), 3).unwrap();
        assert_eq!(
            out.entries().collect::<Vec<_>>(),
            p.entries().collect::<Vec<_>>()
        );
        assert!(Group::ALL.iter().all(|&g| !out.is_frozen(g)));
    }

    #[test]
    fn a5_reinitializes_dense_only() {
        let (p, net) = small();
        let out = apply_plan(&net, &p, &Strategy::A5.plan(), 3).unwrap();
        assert!(out.group_bit_identical(&p, Group::Conv));
        assert!(out.group_bit_identical(&p, Group::Lstm));
        assert!(out.group_max_abs_diff(&p, Group::Dense) > 0.0);
        assert!(
            out.is_frozen(Group::Conv)
                && out.is_frozen(Group::Lstm)
                && !out.is_frozen(Group::Dense)
        );
    }

    #[test]
    fn a2_and_a4_differ_only_in_unfrozen_groups() {
        let (p, net) = small();
        let a2 = apply_plan(&net, &p, &Strategy::A2.plan(), 3).unwrap();
        let a4 = apply_plan(&net, &p, &Strategy::A4.plan(), 3).unwrap();
        assert!(a2.group_bit_identical(&a4, Group::Conv));
        assert!(!a2.group_bit_identical(&a4, Group::Lstm));
        assert!(!a2.group_bit_identical(&a4, Group::Dense));
        assert_eq!(a2.frozen_flags(), a4.frozen_flags());
    }

    #[test]
    fn fine_tune_rejects_empty_split() {
        let (p, net) = small();
        assert!(matches!(
            fine_tune(&net, p, &[], &[], &TrainConfig::default(), 1),
            Err(Error::Usage(_))
        ));
    }
}
