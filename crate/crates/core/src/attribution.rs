//! Per-hour Shapley attribution over feature channels.
//!
//! A coalition is a set of channels. Channels outside the coalition are
//! "unknown": their whole history is replaced by 0, the value the imputation
//! assigns to a never-measured channel. The value of a coalition at hour `t`
//! is the model's risk at `t`. The network is causal, so one forward pass
//! yields the value at every hour at once.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{channel_name, EpisodeTensor};
use crate::error::{Error, Result};
use crate::model::CnnLstm;
use crate::nn::{sigmoid, ParamStore};
use crate::rng;
use crate::tensor::Tensor;

/// Exact enumeration is limited to this many channels.
pub const MAX_EXACT_FEATURES: usize = 12;
pub const DEFAULT_PERMUTATIONS: usize = 500;
pub const MIN_PERMUTATIONS: usize = 50;

/// Anything that maps a `(T, F)` episode to `T` hourly risks.
pub trait HourlyRiskModel: Sync {
    fn n_features(&self) -> usize;
    fn hourly_risks(&self, values: &Tensor) -> Result<Vec<f64>>;
}

/// A network together with its parameters.
pub struct Trained<'a> {
    pub net: &'a CnnLstm,
    pub params: &'a ParamStore,
}

impl HourlyRiskModel for Trained<'_> {
    fn n_features(&self) -> usize {
        self.net.config().n_features
    }

    fn hourly_risks(&self, values: &Tensor) -> Result<Vec<f64>> {
        self.net.risks(self.params, values)
    }
}

/// `risk[t] = sigmoid(bias + sum_f weights[f] * x[t, f])`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRiskModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl HourlyRiskModel for LinearRiskModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn hourly_risks(&self, values: &Tensor) -> Result<Vec<f64>> {
        values.expect_shape(&[values.rows(), self.weights.len()], "linear model input")?;
        Ok((0..values.rows())
            .map(|t| {
                let z: f64 = values
                    .row(t)
                    .iter()
                    .zip(&self.weights)
                    .map(|(x, w)| x * w)
                    .sum();
                sigmoid(self.bias + z)
            })
            .collect())
    }
}

fn masked(values: &Tensor, known: &[bool]) -> Tensor {
    let mut out = values.clone();
    let f = values.cols();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        if !known[i % f] {
            *v = 0.0;
        }
    }
    out
}

fn check_input(model: &dyn HourlyRiskModel, values: &Tensor) -> Result<()> {
    if values.shape().len() != 2 || values.cols() != model.n_features() {
        return Err(Error::usage(format!(
            "episode shape {:?} does not match a model with {} features",
            values.shape(),
            model.n_features()
        )));
    }
    if values.rows() == 0 {
        return Err(Error::usage("empty episode"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    pub patient_id: String,
    /// `(T, F)` signed contributions toward the risk.
    pub values: Tensor,
    /// `(T, F)` standard errors; zero for exact enumeration.
    pub std_errors: Tensor,
    pub risk: Vec<f64>,
    /// Risk of the all-unknown episode.
    pub baseline_risk: Vec<f64>,
    pub n_permutations: Option<usize>,
}

impl AttributionMatrix {
    pub fn hour(&self, hour: usize) -> Result<&[f64]> {
        if hour == 0 || hour > self.values.rows() {
            return Err(Error::usage(format!(
                "hour {hour} outside 1..={}",
                self.values.rows()
            )));
        }
        Ok(self.values.row(hour - 1))
    }

    /// Largest `|sum_f values[t, f] - (risk[t] - baseline[t])|` over hours.
    pub fn efficiency_gap(&self) -> f64 {
        (0..self.values.rows())
            .map(|t| {
                let s: f64 = self.values.row(t).iter().sum();
                (s - (self.risk[t] - self.baseline_risk[t])).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Exact Shapley values for every hour by enumerating all `2^F` coalitions.
pub fn shapley_exact_all(
    model: &dyn HourlyRiskModel,
    patient_id: &str,
    values: &Tensor,
) -> Result<AttributionMatrix> {
    check_input(model, values)?;
    let f = values.cols();
    if f > MAX_EXACT_FEATURES {
        return Err(Error::usage(format!(
            "exact enumeration supports at most {MAX_EXACT_FEATURES} features, got {f}; use Monte-Carlo estimation"
        )));
    }
    let t = values.rows();
    let n_coalitions = 1usize << f;
    let v: Vec<Vec<f64>> = (0..n_coalitions)
        .into_par_iter()
        .map(|mask| {
            let known: Vec<bool> = (0..f).map(|c| mask >> c & 1 == 1).collect();
            model.hourly_risks(&masked(values, &known))
        })
        .collect::<Result<_>>()?;

    // weight[s] = s! (F - s - 1)! / F!
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    let weight: Vec<f64> = (0..f)
        .map(|s| fact(s) * fact(f - s - 1) / fact(f))
        .collect();
    let mut out = Tensor::zeros(&[t, f]);
    for mask in 0..n_coalitions {
        let size = (mask as u32).count_ones() as usize;
        for c in 0..f {
            if mask >> c & 1 == 1 {
                continue;
            }
            let with = &v[mask | 1 << c];
            let w = weight[size];
            for h in 0..t {
                out.data_mut()[h * f + c] += w * (with[h] - v[mask][h]);
            }
        }
    }
    Ok(AttributionMatrix {
        patient_id: patient_id.to_string(),
        values: out,
        std_errors: Tensor::zeros(&[t, f]),
        risk: v[n_coalitions - 1].clone(),
        baseline_risk: v[0].clone(),
        n_permutations: None,
    })
}

/// Exact Shapley values at one 1-based hour.
pub fn shapley_exact(
    model: &dyn HourlyRiskModel,
    values: &Tensor,
    hour: usize,
) -> Result<Vec<f64>> {
    Ok(shapley_exact_all(model, "", values)?.hour(hour)?.to_vec())
}

/// Monte-Carlo permutation estimate for every hour. Permutation `k` draws from
/// a stream derived from `seed` and `k`; contributions are reduced in
/// permutation order.
pub fn shapley_mc_all(
    model: &dyn HourlyRiskModel,
    patient_id: &str,
    values: &Tensor,
    n_permutations: usize,
    seed: u64,
) -> Result<AttributionMatrix> {
    if n_permutations < 1 {
        return Err(Error::config("at least one permutation is required"));
    }
    check_input(model, values)?;
    let (t, f) = (values.rows(), values.cols());
    let baseline = model.hourly_risks(&masked(values, &vec![false; f]))?;
    let full = model.hourly_risks(values)?;

    let contributions: Vec<Vec<f64>> = (0..n_permutations)
        .into_par_iter()
        .map(|k| {
            let mut order: Vec<usize> = (0..f).collect();
            order.shuffle(&mut rng::rng(rng::derive(seed, k as u64)));
            let mut known = vec![false; f];
            let mut prev = baseline.clone();
            let mut out = vec![0.0; t * f];
            for (step, &c) in order.iter().enumerate() {
                known[c] = true;
                let cur = if step + 1 == f {
                    full.clone()
                } else {
                    model.hourly_risks(&masked(values, &known))?
                };
                for h in 0..t {
                    out[h * f + c] = cur[h] - prev[h];
                }
                prev = cur;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let m = n_permutations as f64;
    let mut mean = vec![0.0; t * f];
    for c in &contributions {
        for (a, b) in mean.iter_mut().zip(c) {
            *a += b;
        }
    }
    mean.iter_mut().for_each(|x| *x /= m);
    let mut se = vec![0.0; t * f];
    if n_permutations > 1 {
        for c in &contributions {
            for ((s, b), mu) in se.iter_mut().zip(c).zip(&mean) {
                *s += (b - mu) * (b - mu);
            }
        }
        se.iter_mut().for_each(|s| *s = (*s / (m - 1.0) / m).sqrt());
    }
    Ok(AttributionMatrix {
        patient_id: patient_id.to_string(),
        values: Tensor::from_vec(&[t, f], mean)?,
        std_errors: Tensor::from_vec(&[t, f], se)?,
        risk: full,
        baseline_risk: baseline,
        n_permutations: Some(n_permutations),
    })
}

/// Monte-Carlo estimates and standard errors at one 1-based hour.
pub fn shapley_mc(
    model: &dyn HourlyRiskModel,
    values: &Tensor,
    hour: usize,
    n_permutations: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = shapley_mc_all(model, "", values, n_permutations, seed)?;
    let est = a.hour(hour)?.to_vec();
    Ok((est, a.std_errors.row(hour - 1).to_vec()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub patient_id: String,
    pub hour: usize,
    pub feature: String,
    pub raw_value: f64,
    pub shapley_value: f64,
    /// 1 = largest mean absolute attribution over all hours.
    pub rank: usize,
}

/// Channel order by descending mean `|attribution|` across hours, ties by
/// channel index.
pub fn feature_ranking(values: &Tensor) -> Vec<usize> {
    let (t, f) = (values.rows(), values.cols());
    let score: Vec<f64> = (0..f)
        .map(|c| (0..t).map(|h| values.at(h, c).abs()).sum::<f64>() / t as f64)
        .collect();
    let mut order: Vec<usize> = (0..f).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    order
}

/// Channels ordered by `|attribution|` at one 1-based hour.
pub fn ranking_at_hour(attr: &AttributionMatrix, hour: usize) -> Result<Vec<usize>> {
    let row = attr.hour(hour)?;
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].abs().total_cmp(&row[a].abs()).then(a.cmp(&b)));
    Ok(order)
}

/// One row per (hour, feature), joining the model-input value with its
/// attribution. Feature names come from the channel table when the width
/// matches it, otherwise `f<index>`.
pub fn summary_series(
    attr: &AttributionMatrix,
    episode: &EpisodeTensor,
) -> Result<Vec<SummaryRow>> {
    if episode.values.shape() != attr.values.shape() {
        return Err(Error::usage("attribution and episode shapes differ"));
    }
    let (t, f) = (attr.values.rows(), attr.values.cols());
    let order = feature_ranking(&attr.values);
    let mut rank = vec![0; f];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r + 1;
    }
    let name = |c: usize| {
        if f == crate::data::N_CHANNELS {
            channel_name(c).to_string()
        } else {
            format!("f{c}")
        }
    };
    let mut rows = Vec::with_capacity(t * f);
    for h in 0..t {
        for c in 0..f {
            rows.push(SummaryRow {
                patient_id: attr.patient_id.clone(),
                hour: h + 1,
                feature: name(c),
                raw_value: episode.values.at(h, c),
                shapley_value: attr.values.at(h, c),
                rank: rank[c],
            });
        }
    }
    Ok(rows)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("patient_id,hour,feature,raw_value,shapley_value,rank\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.9},{}\n",
            r.patient_id, r.hour, r.feature, r.raw_value, r.shapley_value, r.rank
        ));
    }
    out
}
