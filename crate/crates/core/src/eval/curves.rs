//! AUC as a function of the number of hours observed, and relative gains
//! between two sets of curves.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Domain, EpisodeTensor};
use crate::error::{Error, Result};
use crate::eval::metrics::auc;
use crate::model::CnnLstm;
use crate::nn::ParamStore;

/// `{5, 10, ..., 45, 48}`.
pub fn default_grid() -> Vec<usize> {
    let mut g: Vec<usize> = (5..=45).step_by(5).collect();
    g.push(48);
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucCurve {
    pub grid: Vec<usize>,
    pub auc: Vec<f64>,
}

/// Per-hour AUC from precomputed risk sequences; `risks[i][y - 1]` is patient
/// `i`'s risk after `y` hours.
pub fn curve_from_risks(risks: &[Vec<f64>], labels: &[bool], grid: &[usize]) -> Result<AucCurve> {
    let mut auc_values = Vec::with_capacity(grid.len());
    for &y in grid {
        if y == 0 || risks.iter().any(|r| y > r.len()) {
            return Err(Error::usage(format!(
                "grid point {y} outside the observed hours"
            )));
        }
        let scores: Vec<f64> = risks.iter().map(|r| r[y - 1]).collect();
        auc_values.push(auc(&scores, labels)?);
    }
    Ok(AucCurve {
        grid: grid.to_vec(),
        auc: auc_values,
    })
}

/// Risks at every hour for each episode. The network is causal, so the risk at
/// hour `y` of the full pass equals a prediction from the first `y` hours.
pub fn hourly_risks(
    net: &CnnLstm,
    params: &ParamStore,
    episodes: &[EpisodeTensor],
) -> Result<Vec<Vec<f64>>> {
    episodes
        .par_iter()
        .map(|e| net.risks(params, &e.values))
        .collect()
}

pub fn auc_vs_hours(
    net: &CnnLstm,
    params: &ParamStore,
    episodes: &[EpisodeTensor],
    grid: &[usize],
) -> Result<AucCurve> {
    let risks = hourly_risks(net, params, episodes)?;
    let labels: Vec<bool> = episodes.iter().map(|e| e.outcome).collect();
    curve_from_risks(&risks, &labels, grid)
}

/// Curves of one model for several domains on a shared grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurveTable {
    pub grid: Vec<usize>,
    pub curves: BTreeMap<Domain, Vec<f64>>,
}

impl CurveTable {
    pub fn new(grid: Vec<usize>) -> Self {
        CurveTable {
            grid,
            curves: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, domain: Domain, curve: &AucCurve) -> Result<()> {
        if curve.grid != self.grid {
            return Err(Error::usage("curve grid differs from table grid"));
        }
        self.curves.insert(domain, curve.auc.clone());
        Ok(())
    }

    pub fn to_csv(&self, model: &str) -> String {
        let mut out = String::from("domain,model,y,auc\n");
        for (d, values) in &self.curves {
            for (y, v) in self.grid.iter().zip(values) {
                out.push_str(&format!("{d},{model},{y},{v:.6}\n"));
            }
        }
        out
    }
}

/// Percentage gain `100 (a - b) / b` per domain and grid point.
pub fn gains_table(a: &CurveTable, b: &CurveTable) -> Result<CurveTable> {
    if a.grid != b.grid {
        return Err(Error::usage("gains need matching grids"));
    }
    if a.curves.keys().ne(b.curves.keys()) {
        return Err(Error::usage("gains need matching domains"));
    }
    let mut out = CurveTable::new(a.grid.clone());
    for (d, va) in &a.curves {
        let vb = &b.curves[d];
        out.curves.insert(
            *d,
            va.iter()
                .zip(vb)
                .map(|(x, y)| 100.0 * (x - y) / y)
                .collect(),
        );
    }
    Ok(out)
}
