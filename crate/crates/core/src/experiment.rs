//! Cross-validated adaptation experiments: per fold, pretrain on the source
//! domains, apply each strategy, fine-tune on the target and evaluate on the
//! target test split, next to target-only and pooled controls.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    make_folds, Cohort, CohortEntry, Domain, EpisodeTensor, FoldSpec, ScalingStats, N_FOLDS,
};
use crate::error::{Error, Result};
use crate::eval::{auc, hourly_risks, ExperimentReport};
use crate::model::{build_model, CnnLstm, ModelConfig};
use crate::nn::ParamStore;
use crate::optim::{train_loop, TrainConfig, TrainTrace};
use crate::rng;
use crate::synth::{generate_cohort, SynthCohortSpec};
use crate::transfer::{apply_plan, fine_tune, pretrain_source, Strategy};

/// Target-only control.
pub const TT: &str = "TT";
/// Model pretrained on the pooled source domains, applied to the target untuned.
pub const POOLED: &str = "POOLED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub strategies: Vec<Strategy>,
    pub horizons: Vec<usize>,
    pub controls: bool,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            strategies: Strategy::ALL.to_vec(),
            horizons: vec![48],
            controls: true,
            seed: 0,
        }
    }
}

/// A trained model from one fold job.
#[derive(Debug, Clone)]
pub struct FoldModel {
    pub target: Domain,
    pub fold: usize,
    pub name: String,
    pub params: ParamStore,
    pub scaling: ScalingStats,
    pub test_ids: Vec<String>,
    pub trace: TrainTrace,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub models: Vec<FoldModel>,
    pub warnings: Vec<String>,
}

/// Train, validation and test episodes of one fold for one target.
pub struct FoldData {
    pub scaling: ScalingStats,
    pub source_train: Vec<EpisodeTensor>,
    pub source_val: Vec<EpisodeTensor>,
    pub target_train: Vec<EpisodeTensor>,
    pub target_val: Vec<EpisodeTensor>,
    pub target_test: Vec<EpisodeTensor>,
}

enum Role {
    Train,
    Val,
    Test,
}

/// Sources keep their fold test patients for training: they are never
/// evaluated. Scaling comes from source and target training patients only.
pub fn fold_data(cohort: &Cohort, fold: &FoldSpec, target: Domain) -> Result<FoldData> {
    fold.check_disjoint()?;
    let mut role: HashMap<&str, Role> = HashMap::new();
    for id in &fold.train_ids {
        role.insert(id, Role::Train);
    }
    for id in &fold.val_ids {
        role.insert(id, Role::Val);
    }
    for id in &fold.test_ids {
        role.insert(id, Role::Test);
    }
    let (mut st, mut sv, mut tt, mut tv, mut te): (
        Vec<&CohortEntry>,
        Vec<_>,
        Vec<_>,
        Vec<_>,
        Vec<_>,
    ) = Default::default();
    for e in &cohort.entries {
        let r = role.get(e.patient_id.as_str()).ok_or_else(|| {
            Error::Internal(format!(
                "patient {} missing from fold {}",
                e.patient_id, fold.fold_id
            ))
        })?;
        match (e.domain == target, r) {
            (true, Role::Train) => tt.push(e),
            (true, Role::Val) => tv.push(e),
            (true, Role::Test) => te.push(e),
            (false, Role::Val) => sv.push(e),
            (false, _) => st.push(e),
        }
    }
    let scaling = ScalingStats::from_grids(st.iter().chain(&tt).map(|e| &e.grid))?;
    let ep = |v: Vec<&CohortEntry>| -> Result<Vec<EpisodeTensor>> {
        v.iter().map(|e| e.episode(&scaling)).collect()
    };
    Ok(FoldData {
        source_train: ep(st)?,
        source_val: ep(sv)?,
        target_train: ep(tt)?,
        target_val: ep(tv)?,
        target_test: ep(te)?,
        scaling,
    })
}

fn evaluate(
    net: &CnnLstm,
    params: &ParamStore,
    test: &[EpisodeTensor],
    horizons: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let risks = hourly_risks(net, params, test)?;
    let labels: Vec<bool> = test.iter().map(|e| e.outcome).collect();
    horizons
        .iter()
        .map(|&y| {
            if y == 0 || risks.iter().any(|r| r.len() < y) {
                return Err(Error::config(format!(
                    "horizon {y} outside the episode length"
                )));
            }
            let s: Vec<f64> = risks.iter().map(|r| r[y - 1]).collect();
            Ok((y, auc(&s, &labels)?))
        })
        .collect()
}

struct Job {
    name: String,
    params: ParamStore,
    trace: TrainTrace,
}

/// All models for one target and fold; jobs after pretraining run in parallel.
pub fn run_fold(
    data: &FoldData,
    target: Domain,
    fold_id: usize,
    target_ids: &HashSet<String>,
    config: &ExperimentConfig,
) -> Result<Vec<(String, ParamStore, TrainTrace, Vec<(usize, f64)>)>> {
    let seed = rng::derive(
        rng::derive_str(config.seed, target.as_str()),
        fold_id as u64,
    );
    let (init, net) = build_model(&config.model, rng::derive_str(seed, "init"))?;
    let pretrained = if config.strategies.is_empty() && !config.controls {
        None
    } else {
        Some(pretrain_source(
            &net,
            init.clone(),
            &data.source_train,
            &data.source_val,
            target,
            target_ids,
            &config.train,
            rng::derive_str(seed, "pretrain"),
        )?)
    };

    enum Spec {
        Strategy(Strategy),
        TargetOnly,
        Pooled,
    }
    let mut specs: Vec<Spec> = config
        .strategies
        .iter()
        .map(|&s| Spec::Strategy(s))
        .collect();
    if config.controls {
        specs.push(Spec::TargetOnly);
        specs.push(Spec::Pooled);
    }
    let jobs: Vec<Job> = specs
        .par_iter()
        .map(|spec| -> Result<Job> {
            match spec {
                Spec::Strategy(s) => {
                    let pre = pretrained
                        .as_ref()
                        .expect("pretrained when strategies are requested");
                    let prepared = apply_plan(
                        &net,
                        &pre.params,
                        &s.plan(),
                        rng::derive_str(seed, s.as_str()),
                    )?;
                    let out = fine_tune(
                        &net,
                        prepared,
                        &data.target_train,
                        &data.target_val,
                        &config.train,
                        rng::derive_str(seed, &format!("fine-tune {s}")),
                    )?;
                    Ok(Job {
                        name: s.to_string(),
                        params: out.params,
                        trace: out.trace,
                    })
                }
                Spec::TargetOnly => {
                    let out = train_loop(
                        &net,
                        init.clone(),
                        &data.target_train,
                        &data.target_val,
                        &config.train,
                        rng::derive_str(seed, TT),
                    )?;
                    Ok(Job {
                        name: TT.into(),
                        params: out.params,
                        trace: out.trace,
                    })
                }
                Spec::Pooled => {
                    let pre = pretrained
                        .as_ref()
                        .expect("pretrained when controls are requested");
                    Ok(Job {
                        name: POOLED.into(),
                        params: pre.params.clone(),
                        trace: pre.trace.clone(),
                    })
                }
            }
        })
        .collect::<Result<_>>()?;
    jobs.into_iter()
        .map(|j| {
            let aucs = evaluate(&net, &j.params, &data.target_test, &config.horizons)?;
            Ok((j.name, j.params, j.trace, aucs))
        })
        .collect()
}

/// Runs every (target, fold) job. Folds are stratified over the whole cohort
/// with `config.seed`; the report is in canonical order.
pub fn run_experiment(
    cohort: &Cohort,
    targets: &[Domain],
    folds: Option<&[usize]>,
    config: &ExperimentConfig,
) -> Result<ExperimentOutput> {
    let domains = cohort.domains();
    if domains.len() < 2 {
        return Err(Error::data(
            "adaptation experiments need at least two domains",
        ));
    }
    for t in targets {
        if !domains.contains(t) {
            return Err(Error::usage(format!(
                "target {t} has no patients in the cohort"
            )));
        }
    }
    let keys: Vec<_> = cohort.entries.iter().map(|e| e.key()).collect();
    let plan = make_folds(&keys, config.seed)?;
    let fold_ids: Vec<usize> = match folds {
        Some(f) => {
            if let Some(bad) = f.iter().find(|&&k| k == 0 || k > N_FOLDS) {
                return Err(Error::usage(format!("fold {bad} outside 1..={N_FOLDS}")));
            }
            f.to_vec()
        }
        None => (1..=N_FOLDS).collect(),
    };
    let mut jobs = Vec::new();
    for &t in targets {
        for &k in &fold_ids {
            jobs.push((t, k));
        }
    }
    let results = jobs
        .par_iter()
        .map(
            |&(target, k)| -> Result<(ExperimentReport, Vec<FoldModel>)> {
                let fold = &plan.folds[k - 1];
                let data = fold_data(cohort, fold, target)?;
                let target_ids: HashSet<String> = cohort
                    .entries
                    .iter()
                    .filter(|e| e.domain == target)
                    .map(|e| e.patient_id.clone())
                    .collect();
                let test_ids: Vec<String> = data
                    .target_test
                    .iter()
                    .map(|e| e.patient_id.clone())
                    .collect();
                let mut rows = ExperimentReport::new();
                let mut models = Vec::new();
                for (name, params, trace, aucs) in run_fold(&data, target, k, &target_ids, config)?
                {
                    for (y, a) in aucs {
                        rows.push(target, &name, k, y, a);
                    }
                    models.push(FoldModel {
                        target,
                        fold: k,
                        name,
                        params,
                        scaling: data.scaling.clone(),
                        test_ids: test_ids.clone(),
                        trace,
                    });
                }
                Ok((rows, models))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new();
    let mut models = Vec::new();
    for (r, m) in results {
        report.extend(r);
        models.extend(m);
    }
    report.sort();
    Ok(ExperimentOutput {
        report,
        models,
        warnings: plan.warnings,
    })
}

/// Small-target adaptation benchmark on a synthetic four-domain family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub target: Domain,
    pub n_source_per_domain: usize,
    pub n_target_train: usize,
    pub n_target_val: usize,
    pub n_target_test: usize,
    pub mortality_rate: f64,
    pub drift_rate: f64,
    /// Multiplier on every domain's specific weights.
    pub specific_scale: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let mut model = ModelConfig::default();
        model.conv_filters = 16;
        model.lstm_hidden = 16;
        model.dense_hidden = 16;
        model.lr = 0.003;
        BenchmarkConfig {
            target: Domain::Coronary,
            n_source_per_domain: 120,
            n_target_train: 64,
            n_target_val: 16,
            n_target_test: 300,
            mortality_rate: 0.3,
            drift_rate: 0.03,
            specific_scale: 2.0,
            model,
            train: TrainConfig {
                batch_size: 32,
                max_epochs: 100,
                patience: 15,
            },
        }
    }
}

impl BenchmarkConfig {
    pub fn cohort_spec(&self) -> SynthCohortSpec {
        let mut spec = SynthCohortSpec::reference();
        for d in &mut spec.domains {
            d.n_patients = if d.domain == self.target {
                self.n_target_train + self.n_target_val + self.n_target_test
            } else {
                self.n_source_per_domain
            };
            d.mortality_rate = self.mortality_rate;
            d.drift_rate = self.drift_rate;
            d.specific_weights
                .iter_mut()
                .for_each(|w| *w *= self.specific_scale);
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub seed: u64,
    pub target_only: f64,
    pub pooled: f64,
    pub strategies: Vec<(Strategy, f64)>,
}

impl BenchmarkResult {
    pub fn best(&self) -> Option<(Strategy, f64)> {
        self.strategies
            .iter()
            .copied()
            .fold(None, |acc, (s, a)| match acc {
                Some((_, b)) if b >= a => acc,
                _ => Some((s, a)),
            })
    }
}

/// One seed of the benchmark: generate, pretrain on the three source domains,
/// fine-tune every strategy on the small target split, and score all models
/// on the target test patients at hour 48.
pub fn adaptation_benchmark(config: &BenchmarkConfig, seed: u64) -> Result<BenchmarkResult> {
    let spec = config.cohort_spec();
    let synth = generate_cohort(&spec, seed)?;
    let cohort = Cohort::from_records(&synth.records);
    let (mut source, mut target): (Vec<&CohortEntry>, Vec<&CohortEntry>) = cohort
        .entries
        .iter()
        .partition(|e| e.domain != config.target);
    let mut r = rng::rng(rng::derive_str(seed, "benchmark split"));
    use rand::seq::SliceRandom;
    source.shuffle(&mut r);
    target.shuffle(&mut r);
    let n_source_val = (source.len() as f64 * 0.16).round() as usize;
    let (source_val, source_train) = source.split_at(n_source_val);
    let (target_train, rest) = target.split_at(config.n_target_train);
    let (target_val, target_test) = rest.split_at(config.n_target_val);

    let scaling =
        ScalingStats::from_grids(source_train.iter().chain(target_train).map(|e| &e.grid))?;
    let ep = |v: &[&CohortEntry]| -> Result<Vec<EpisodeTensor>> {
        v.iter().map(|e| e.episode(&scaling)).collect()
    };
    let data = FoldData {
        source_train: ep(source_train)?,
        source_val: ep(source_val)?,
        target_train: ep(target_train)?,
        target_val: ep(target_val)?,
        target_test: ep(target_test)?,
        scaling,
    };
    let target_ids: HashSet<String> = target.iter().map(|e| e.patient_id.clone()).collect();
    let exp = ExperimentConfig {
        model: config.model.clone(),
        train: config.train.clone(),
        strategies: Strategy::ALL.to_vec(),
        horizons: vec![48],
        controls: true,
        seed,
    };
    let results = run_fold(&data, config.target, 1, &target_ids, &exp)?;
    let get = |name: &str| -> f64 {
        results
            .iter()
            .find(|r| r.0 == name)
            .map(|r| r.3[0].1)
            .expect("job present")
    };
    Ok(BenchmarkResult {
        seed,
        target_only: get(TT),
        pooled: get(POOLED),
        strategies: Strategy::ALL
            .iter()
            .map(|&s| (s, get(s.as_str())))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SynthCohortSpec;

    fn tiny_cohort() -> Cohort {
        let mut spec = SynthCohortSpec::reference();
        for d in &mut spec.domains {
            d.n_patients = 30;
            d.mortality_rate = 0.4;
        }
        spec.domains.truncate(2);
        Cohort::from_records(&generate_cohort(&spec, 5).unwrap().records)
    }

    fn tiny_config() -> ExperimentConfig {
        let mut model = ModelConfig::default();
        model.conv_filters = 4;
        model.lstm_hidden = 4;
        model.dense_hidden = 4;
        ExperimentConfig {
            model,
            train: TrainConfig {
                batch_size: 16,
                max_epochs: 2,
                patience: 1,
            },
            strategies: vec![Strategy::A1, Strategy::A3],
            horizons: vec![24, 48],
            controls: true,
            seed: 3,
        }
    }

    #[test]
    fn fold_data_is_leak_free() {
        let c = tiny_cohort();
        let keys: Vec<_> = c.entries.iter().map(|e| e.key()).collect();
        let plan = make_folds(&keys, 1).unwrap();
        let d = fold_data(&c, &plan.folds[0], Domain::Cardiac).unwrap();
        assert!(d
            .source_train
            .iter()
            .chain(&d.source_val)
            .all(|e| e.domain != Domain::Cardiac));
        let test: HashSet<&str> = d
            .target_test
            .iter()
            .map(|e| e.patient_id.as_str())
            .collect();
        assert!(d
            .target_train
            .iter()
            .chain(&d.target_val)
            .all(|e| !test.contains(e.patient_id.as_str())));
        assert_eq!(
            d.target_train.len() + d.target_val.len() + d.target_test.len(),
            30
        );
    }

    #[test]
    fn report_has_every_cell() {
        let c = tiny_cohort();
        let out = run_experiment(&c, &[Domain::Cardiac], Some(&[1, 2]), &tiny_config()).unwrap();
        assert_eq!(out.report.rows.len(), 2 * 4 * 2);
        out.report.check_complete(2).unwrap();
        assert_eq!(out.report.models(), vec!["A1", "A3", POOLED, TT]);
        assert_eq!(out.models.len(), 8);
    }

    #[test]
    fn single_domain_cohort_rejected() {
        let mut c = tiny_cohort();
        c.entries.retain(|e| e.domain == Domain::Cardiac);
        assert!(run_experiment(&c, &[Domain::Cardiac], None, &tiny_config()).is_err());
    }
}
