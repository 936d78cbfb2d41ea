//! Per-fold AUC rows, their aggregates and significance marks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::Domain;
use crate::error::{Error, Result};
use crate::eval::stats::{is_significant, paired_ttest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub domain: Domain,
    pub model: String,
    pub fold: usize,
    pub y: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub domain: Domain,
    pub model: String,
    pub mean: f64,
    pub n: usize,
    /// Paired t-test p-value against the reference model, when one applies.
    pub p_value: Option<f64>,
}

impl ExperimentReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, domain: Domain, model: &str, fold: usize, y: usize, auc: f64) {
        self.rows.push(ReportRow {
            domain,
            model: model.to_string(),
            fold,
            y,
            auc,
        });
    }

    pub fn extend(&mut self, other: ExperimentReport) {
        self.rows.extend(other.rows);
    }

    /// Canonical order: domain, model, y, fold.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            (a.domain, &a.model, a.y, a.fold).cmp(&(b.domain, &b.model, b.y, b.fold))
        });
    }

    pub fn domains(&self) -> Vec<Domain> {
        self.rows
            .iter()
            .map(|r| r.domain)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Models in first-appearance order.
    pub fn models(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.model) {
                out.push(r.model.clone());
            }
        }
        out
    }

    pub fn horizons(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| r.y)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Fold values of one cell ordered by fold id.
    pub fn cell(&self, domain: Domain, model: &str, y: usize) -> Vec<f64> {
        let by_fold: BTreeMap<usize, f64> = self
            .rows
            .iter()
            .filter(|r| r.domain == domain && r.model == model && r.y == y)
            .map(|r| (r.fold, r.auc))
            .collect();
        by_fold.into_values().collect()
    }

    pub fn cell_mean(&self, domain: Domain, model: &str, y: usize) -> Option<f64> {
        let v = self.cell(domain, model, y);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Unweighted mean of the per-domain means of `model`.
    pub fn macro_average(&self, model: &str, y: usize) -> Option<f64> {
        let means: Vec<f64> = self
            .domains()
            .into_iter()
            .filter_map(|d| self.cell_mean(d, model, y))
            .collect();
        (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64)
    }

    /// Every (domain, model, y) cell holds exactly `n_folds` distinct folds.
    pub fn check_complete(&self, n_folds: usize) -> Result<()> {
        let mut cells: BTreeMap<(Domain, &str, usize), BTreeSet<usize>> = BTreeMap::new();
        for r in &self.rows {
            if !cells
                .entry((r.domain, r.model.as_str(), r.y))
                .or_default()
                .insert(r.fold)
            {
                return Err(Error::Internal(format!(
                    "duplicate row for {} {} fold {} y {}",
                    r.domain, r.model, r.fold, r.y
                )));
            }
        }
        for ((d, m, y), folds) in cells {
            if folds.len() != n_folds {
                return Err(Error::Internal(format!(
                    "cell {d}/{m}/y={y} has {} folds, expected {n_folds}",
                    folds.len()
                )));
            }
        }
        Ok(())
    }

    pub fn summarize(&self, y: usize, reference: Option<&str>) -> Result<Vec<CellSummary>> {
        let mut out = Vec::new();
        for model in self.models() {
            for d in self.domains() {
                let v = self.cell(d, &model, y);
                if v.is_empty() {
                    continue;
                }
                let p_value = match reference {
                    Some(r) if r != model => {
                        let rv = self.cell(d, r, y);
                        if rv.len() == v.len() && v.len() >= 2 {
                            Some(paired_ttest(&v, &rv)?)
                        } else {
                            None
                        }
                    }
                    _ => None,
                };
                out.push(CellSummary {
                    domain: d,
                    mean: v.iter().sum::<f64>() / v.len() as f64,
                    n: v.len(),
                    model: model.clone(),
                    p_value,
                });
            }
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("domain,model,fold,y,auc\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6}\n",
                r.domain, r.model, r.fold, r.y, r.auc
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut report = ExperimentReport::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::data(format!("report line {}: malformed row {line:?}", i + 1));
            if f.len() != 5 {
                return Err(bad());
            }
            report.push(
                f[0].parse().map_err(|_| bad())?,
                f[1],
                f[2].parse().map_err(|_| bad())?,
                f[3].parse().map_err(|_| bad())?,
                f[4].parse().map_err(|_| bad())?,
            );
        }
        Ok(report)
    }

    /// One row per model, one column per domain plus the macro average. A `*`
    /// marks cells significantly different from `reference` (p <= 0.05).
    pub fn render_table(&self, y: usize, reference: Option<&str>) -> Result<String> {
        let domains = self.domains();
        let summary = self.summarize(y, reference)?;
        let width = self
            .models()
            .iter()
            .map(|m| m.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!("{:<width$}", "model");
        for d in &domains {
            out.push_str(&format!(" {:>9}", d.as_str()));
        }
        out.push_str(&format!(" {:>9}\n", "Avg"));
        for model in self.models() {
            out.push_str(&format!("{model:<width$}"));
            for d in &domains {
                match summary.iter().find(|c| c.model == model && c.domain == *d) {
                    Some(c) => {
                        let mark = if c.p_value.is_some_and(is_significant) {
                            "*"
                        } else {
                            " "
                        };
                        out.push_str(&format!(" {:>8.3}{mark}", c.mean));
                    }
                    None => out.push_str(&format!(" {:>9}", "-")),
                }
            }
            match self.macro_average(&model, y) {
                Some(m) => out.push_str(&format!(" {m:>8.3}\n")),
                None => out.push_str(&format!(" {:>9}\n", "-")),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> ExperimentReport {
        let mut r = ExperimentReport::new();
        for fold in 1..=5 {
            let f = fold as f64 * 0.01;
            r.push(Domain::Cardiac, "TT", fold, 48, 0.70 + f);
            r.push(Domain::Cardiac, "A1", fold, 48, 0.80 + f);
            r.push(Domain::Medical, "TT", fold, 48, 0.60 + f);
            r.push(
                Domain::Medical,
                "A1",
                fold,
                48,
                0.60 + f + 0.001 * (fold % 2) as f64,
            );
        }
        r
    }

    #[test]
    fn macro_average_is_mean_of_domain_means() {
        let r = report();
        let expect = (r.cell_mean(Domain::Cardiac, "A1", 48).unwrap()
            + r.cell_mean(Domain::Medical, "A1", 48).unwrap())
            / 2.0;
        assert_eq!(r.macro_average("A1", 48).unwrap(), expect);
    }

    #[test]
    fn completeness() {
        let mut r = report();
        r.check_complete(5).unwrap();
        r.rows.pop();
        assert!(r.check_complete(5).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let r = report();
        let back = ExperimentReport::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back.to_csv(), r.to_csv());
    }

    #[test]
    fn table_marks_significance() {
        let table = report().render_table(48, Some("TT")).unwrap();
        let a1 = table.lines().find(|l| l.starts_with("A1")).unwrap();
        assert!(a1.contains("0.830*"), "{table}");
        assert!(!a1.contains("0.630*"), "{table}");
    }
}
