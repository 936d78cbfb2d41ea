#![allow(dead_code)]

use icu_adapt::data::{Cohort, Domain, EpisodeTensor, ScalingStats};
use icu_adapt::model::{build_model, CnnLstm, ModelConfig};
use icu_adapt::nn::ParamStore;
use icu_adapt::optim::{train_loop, TrainConfig};
use icu_adapt::synth::{generate_cohort, SynthCohort, SynthCohortSpec};

/// Reference family shrunk to `n` patients per domain with the given
/// mortality and drift.
pub fn small_spec(n: usize, mortality: f64, drift: f64) -> SynthCohortSpec {
    let mut spec = SynthCohortSpec::reference();
    for d in &mut spec.domains {
        d.n_patients = n;
        d.mortality_rate = mortality;
        d.drift_rate = drift;
    }
    spec
}

pub struct Prepared {
    pub synth: SynthCohort,
    pub cohort: Cohort,
    pub scaling: ScalingStats,
    pub episodes: Vec<EpisodeTensor>,
}

/// Generated cohort and its episodes, scaled over every patient.
pub fn prepare(spec: &SynthCohortSpec, seed: u64) -> Prepared {
    let synth = generate_cohort(spec, seed).unwrap();
    let cohort = Cohort::from_records(&synth.records);
    let scaling = ScalingStats::from_grids(cohort.entries.iter().map(|e| &e.grid)).unwrap();
    let episodes = cohort
        .entries
        .iter()
        .map(|e| e.episode(&scaling).unwrap())
        .collect();
    Prepared {
        synth,
        cohort,
        scaling,
        episodes,
    }
}

pub fn narrow_config(n_features: usize, width: usize) -> ModelConfig {
    let mut c = ModelConfig::with_features(n_features);
    c.conv_filters = width;
    c.lstm_hidden = width;
    c.dense_hidden = width;
    c.lr = 0.003;
    c
}

/// Trains from a fresh initialization; the last fifth of `episodes` is the
/// validation split.
pub fn train(
    episodes: &[EpisodeTensor],
    config: &ModelConfig,
    epochs: usize,
    seed: u64,
) -> (CnnLstm, ParamStore) {
    let (init, net) = build_model(config, seed).unwrap();
    let n_val = (episodes.len() / 5).max(1);
    let (train, val) = episodes.split_at(episodes.len() - n_val);
    let tc = TrainConfig {
        batch_size: 32,
        max_epochs: epochs,
        patience: 8,
    };
    let out = train_loop(&net, init, train, val, &tc, seed ^ 0x5eed).unwrap();
    (net, out.params)
}

pub fn of_domain(episodes: &[EpisodeTensor], d: Domain) -> Vec<EpisodeTensor> {
    episodes.iter().filter(|e| e.domain == d).cloned().collect()
}
