//! Canonical cohort file: one JSON object per line holding a patient's id,
//! domain, outcome, raw hourly grid (`null` where unmeasured) and mask.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::folds::FoldKey;
use crate::data::impute::{fill_and_impute, EpisodeTensor, ScalingStats};
use crate::data::record::{Domain, PatientRecord, N_CHANNELS, N_HOURS};
use crate::data::resample::{resample_hourly, RawGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CohortEntry {
    pub patient_id: String,
    pub domain: Domain,
    pub outcome: bool,
    pub grid: RawGrid,
}

#[derive(Serialize, Deserialize)]
struct CohortLine {
    id: String,
    domain: Domain,
    outcome: u8,
    values: Vec<Vec<Option<f64>>>,
    mask: Vec<Vec<u8>>,
}

impl CohortEntry {
    pub fn from_record(record: &PatientRecord) -> Self {
        CohortEntry {
            patient_id: record.patient_id.clone(),
            domain: record.domain,
            outcome: record.outcome,
            grid: resample_hourly(record),
        }
    }

    pub fn key(&self) -> FoldKey {
        FoldKey {
            patient_id: self.patient_id.clone(),
            domain: self.domain,
            outcome: self.outcome,
        }
    }

    pub fn episode(&self, stats: &ScalingStats) -> Result<EpisodeTensor> {
        fill_and_impute(
            &self.patient_id,
            self.domain,
            self.outcome,
            &self.grid,
            stats,
        )
    }

    fn to_line(&self) -> CohortLine {
        let g = &self.grid;
        let rows = |f: &dyn Fn(Option<f64>) -> _| -> Vec<Vec<_>> {
            (0..g.n_hours)
                .map(|h| (0..g.n_channels).map(|c| f(g.get(h, c))).collect())
                .collect()
        };
        CohortLine {
            id: self.patient_id.clone(),
            domain: self.domain,
            outcome: u8::from(self.outcome),
            values: rows(&|v| v),
            mask: (0..g.n_hours)
                .map(|h| {
                    (0..g.n_channels)
                        .map(|c| u8::from(g.is_observed(h, c)))
                        .collect()
                })
                .collect(),
        }
    }

    fn from_line(line: CohortLine) -> Result<Self> {
        let n_hours = line.values.len();
        let n_channels = line.values.first().map_or(0, Vec::len);
        if n_hours != N_HOURS || n_channels != N_CHANNELS {
            return Err(Error::data(format!(
                "patient {}: grid is {n_hours}x{n_channels}, expected {N_HOURS}x{N_CHANNELS}",
                line.id
            )));
        }
        let mut grid = RawGrid::empty(n_hours, n_channels);
        for (h, (row, mrow)) in line.values.iter().zip(&line.mask).enumerate() {
            if row.len() != n_channels || mrow.len() != n_channels {
                return Err(Error::data(format!("patient {}: ragged row {h}", line.id)));
            }
            for (c, (&v, &m)) in row.iter().zip(mrow).enumerate() {
                if v.is_some() != (m == 1) {
                    return Err(Error::data(format!(
                        "patient {}: mask disagrees with values at ({h}, {c})",
                        line.id
                    )));
                }
                grid.set(h, c, v);
            }
        }
        Ok(CohortEntry {
            patient_id: line.id,
            domain: line.domain,
            outcome: line.outcome == 1,
            grid,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cohort {
    pub entries: Vec<CohortEntry>,
}

/// Per-domain size and mortality.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSummary {
    pub domain: Domain,
    pub n: usize,
    pub deaths: usize,
    pub mortality_rate: f64,
    /// Fraction of all cohort deaths falling in this domain.
    pub share_of_deaths: f64,
}

impl Cohort {
    pub fn from_records(records: &[PatientRecord]) -> Self {
        Cohort {
            entries: records.iter().map(CohortEntry::from_record).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn domains(&self) -> Vec<Domain> {
        let mut d: Vec<Domain> = self.entries.iter().map(|e| e.domain).collect();
        d.sort();
        d.dedup();
        d
    }

    pub fn domain_entries(&self, domain: Domain) -> Vec<&CohortEntry> {
        self.entries.iter().filter(|e| e.domain == domain).collect()
    }

    pub fn find(&self, id: &str) -> Option<&CohortEntry> {
        self.entries.iter().find(|e| e.patient_id == id)
    }

    pub fn summary(&self) -> Vec<DomainSummary> {
        let total_deaths = self.entries.iter().filter(|e| e.outcome).count();
        self.domains()
            .into_iter()
            .map(|d| {
                let n = self.entries.iter().filter(|e| e.domain == d).count();
                let deaths = self
                    .entries
                    .iter()
                    .filter(|e| e.domain == d && e.outcome)
                    .count();
                DomainSummary {
                    domain: d,
                    n,
                    deaths,
                    mortality_rate: deaths as f64 / n as f64,
                    share_of_deaths: if total_deaths == 0 {
                        0.0
                    } else {
                        deaths as f64 / total_deaths as f64
                    },
                }
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(s, "{}", serde_json::to_string(&e.to_line())?);
        }
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: CohortLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                file: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            entries.push(CohortEntry::from_line(parsed)?);
        }
        if entries.is_empty() {
            return Err(Error::data(format!(
                "cohort file {} is empty",
                path.display()
            )));
        }
        Ok(Cohort { entries })
    }
}
