//! Patient-level, stratified five-fold splits with 64/16/20 train/val/test
//! proportions.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::record::Domain;
use crate::error::{Error, Result};
use crate::rng;

pub const N_FOLDS: usize = 5;

/// Strata with fewer deaths than this are split without regard to outcome.
pub const MIN_STRATUM_DEATHS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSpec {
    /// 1-based.
    pub fold_id: usize,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl FoldSpec {
    /// Hard failure when any patient appears in two of the three sets.
    pub fn check_disjoint(&self) -> Result<()> {
        let sets = [
            ("train", &self.train_ids),
            ("val", &self.val_ids),
            ("test", &self.test_ids),
        ];
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for (label, ids) in sets {
            for id in ids.iter() {
                if let Some(prev) = seen.insert(id.as_str(), label) {
                    return Err(Error::Leakage(format!(
                        "fold {}: patient {id} in both {prev} and {label}",
                        self.fold_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Identity, stratum and label of one patient, as fold construction needs them.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldKey {
    pub patient_id: String,
    pub domain: Domain,
    pub outcome: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub folds: Vec<FoldSpec>,
    pub warnings: Vec<String>,
}

/// Stratified by `(domain, outcome)`; a domain with fewer than five deaths is
/// one stratum. Within each stratum patients are shuffled and the strata are
/// concatenated, so dealing positions round-robin spreads every stratum evenly.
pub fn make_folds(cohort: &[FoldKey], seed: u64) -> Result<FoldPlan> {
    if cohort.is_empty() {
        return Err(Error::usage("cannot build folds for an empty cohort"));
    }
    let mut unique = HashSet::new();
    if let Some(k) = cohort
        .iter()
        .find(|k| !unique.insert(k.patient_id.as_str()))
    {
        return Err(Error::data(format!(
            "duplicate patient id {}",
            k.patient_id
        )));
    }

    let mut warnings = Vec::new();
    let mut strata: BTreeMap<(Domain, Option<bool>), Vec<String>> = BTreeMap::new();
    for d in Domain::ALL {
        let members: Vec<&FoldKey> = cohort.iter().filter(|k| k.domain == d).collect();
        if members.is_empty() {
            continue;
        }
        let deaths = members.iter().filter(|k| k.outcome).count();
        let stratify = deaths >= MIN_STRATUM_DEATHS;
        if !stratify {
            warnings.push(format!(
                "{d}: only {deaths} deaths, folds not stratified by outcome for this domain"
            ));
            log::warn!("{}", warnings.last().expect("just pushed"));
        }
        for k in members {
            let key = (d, stratify.then_some(k.outcome));
            strata.entry(key).or_default().push(k.patient_id.clone());
        }
    }

    let mut r = rng::rng(rng::derive_str(seed, "folds"));
    let mut dealt: Vec<String> = Vec::with_capacity(cohort.len());
    for ids in strata.values_mut() {
        ids.sort();
        ids.shuffle(&mut r);
        dealt.extend(ids.iter().cloned());
    }

    let mut folds = Vec::with_capacity(N_FOLDS);
    for fold in 0..N_FOLDS {
        let mut spec = FoldSpec {
            fold_id: fold + 1,
            train_ids: Vec::new(),
            val_ids: Vec::new(),
            test_ids: Vec::new(),
        };
        let mut rest = 0usize;
        for (pos, id) in dealt.iter().enumerate() {
            if pos % N_FOLDS == fold {
                spec.test_ids.push(id.clone());
            } else {
                // Every fifth of the remaining 80% goes to validation: 16% overall.
                if (rest + fold).is_multiple_of(N_FOLDS) {
                    spec.val_ids.push(id.clone());
                } else {
                    spec.train_ids.push(id.clone());
                }
                rest += 1;
            }
        }
        spec.check_disjoint()?;
        folds.push(spec);
    }
    Ok(FoldPlan { folds, warnings })
}
