//! Per-hour coordinates and metadata for risk-space construction.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Domain, EpisodeTensor};
use crate::error::{Error, Result};
use crate::model::{CnnLstm, Mode};
use crate::nn::ParamStore;
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMeta {
    pub patient_id: String,
    pub domain: Domain,
    /// 1-based.
    pub hour: usize,
    pub risk: f64,
    pub outcome: bool,
}

/// Row `i` of `coords` belongs to `meta[i]`. Rows of one patient are
/// contiguous and hour-ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationSet {
    pub coords: Tensor,
    pub meta: Vec<PointMeta>,
}

impl RepresentationSet {
    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn patients(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for m in &self.meta {
            if out.last() != Some(&m.patient_id.as_str()) {
                out.push(&m.patient_id);
            }
        }
        out
    }

    /// Keeps whole patients. Returned rows stay in input order.
    pub fn select_patients(&self, keep: &[&str]) -> RepresentationSet {
        let keep: std::collections::HashSet<&str> = keep.iter().copied().collect();
        let cols = self.coords.cols();
        let mut data = Vec::new();
        let mut meta = Vec::new();
        for (i, m) in self.meta.iter().enumerate() {
            if keep.contains(m.patient_id.as_str()) {
                data.extend_from_slice(self.coords.row(i));
                meta.push(m.clone());
            }
        }
        RepresentationSet {
            coords: Tensor::from_vec(&[meta.len(), cols], data).expect("row-aligned"),
            meta,
        }
    }

    /// Uniform seeded subsample of whole patients so at most `max_points`
    /// rows remain.
    pub fn subsample(&self, max_points: usize, seed: u64) -> RepresentationSet {
        if self.len() <= max_points {
            return self.clone();
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for m in &self.meta {
            *counts.entry(&m.patient_id).or_default() += 1;
        }
        let mut ids = self.patients();
        ids.shuffle(&mut rng::rng(seed));
        let mut keep = Vec::new();
        let mut total = 0;
        for id in ids {
            let c = counts[id];
            if total + c > max_points {
                continue;
            }
            total += c;
            keep.push(id);
        }
        self.select_patients(&keep)
    }

    pub fn domain(&self, domain: Domain) -> RepresentationSet {
        let ids: Vec<&str> = self
            .meta
            .iter()
            .filter(|m| m.domain == domain)
            .map(|m| m.patient_id.as_str())
            .collect();
        self.select_patients(&ids)
    }
}

fn assemble(
    per_patient: Vec<(Vec<f64>, Vec<PointMeta>)>,
    width: usize,
) -> Result<RepresentationSet> {
    let mut data = Vec::new();
    let mut meta = Vec::new();
    for (d, m) in per_patient {
        data.extend(d);
        meta.extend(m);
    }
    Ok(RepresentationSet {
        coords: Tensor::from_vec(&[meta.len(), width], data)?,
        meta,
    })
}

/// Stacked LSTM hidden states (inference mode), one row per patient-hour.
pub fn collect_representations(
    net: &CnnLstm,
    params: &ParamStore,
    episodes: &[EpisodeTensor],
) -> Result<RepresentationSet> {
    if episodes.is_empty() {
        return Err(Error::usage("no episodes to project"));
    }
    let width = net.config().lstm_hidden;
    let parts = episodes
        .par_iter()
        .map(|e| {
            let p = net.forward(params, &e.patient_id, &e.values, Mode::Inference)?;
            let meta = p
                .risks
                .iter()
                .enumerate()
                .map(|(t, &risk)| PointMeta {
                    patient_id: e.patient_id.clone(),
                    domain: e.domain,
                    hour: t + 1,
                    risk,
                    outcome: e.outcome,
                })
                .collect();
            Ok((p.representations.into_data(), meta))
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(parts, width)
}

/// Raw-data variant: each row is the model-input feature vector of one hour.
/// Risks still come from the model.
pub fn collect_raw(
    net: &CnnLstm,
    params: &ParamStore,
    episodes: &[EpisodeTensor],
) -> Result<RepresentationSet> {
    if episodes.is_empty() {
        return Err(Error::usage("no episodes to project"));
    }
    let width = episodes[0].n_channels();
    let parts = episodes
        .par_iter()
        .map(|e| {
            let risks = net.risks(params, &e.values)?;
            let meta = risks
                .iter()
                .enumerate()
                .map(|(t, &risk)| PointMeta {
                    patient_id: e.patient_id.clone(),
                    domain: e.domain,
                    hour: t + 1,
                    risk,
                    outcome: e.outcome,
                })
                .collect();
            Ok((e.values.data().to_vec(), meta))
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(parts, width)
}
