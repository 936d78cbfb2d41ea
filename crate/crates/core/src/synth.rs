//! Seeded synthetic multi-domain cohorts with a known generating process.
//!
//! Each channel follows a stationary AR(1) process in standardized units.
//! Patients who die drift linearly in time along the direction
//! `shared_weights + specific_weights` of their domain, so late hours carry
//! more signal than early ones. Because the process is Gaussian the exact
//! log-likelihood ratio of death after any prefix of hours is available; the
//! resulting posterior is the ground-truth risk retained for every patient.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::record::{
    time_series_index, Domain, Measurement, PatientRecord, N_HOURS, N_TIME_SERIES, TIME_SERIES,
};
use crate::error::{Error, Result};
use crate::eval::auc;
use crate::nn::sigmoid;
use crate::rng;

/// Channels that drift for doomed patients, with unnormalized weights.
pub const DRIFT_CHANNELS: [(&str, f64); 5] = [
    ("Lactate", 2.0),
    ("Urine", -1.0),
    ("HCO3", -1.0),
    ("Glucose", 0.75),
    ("HR", 0.75),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDomainSpec {
    pub domain: Domain,
    pub n_patients: usize,
    pub mortality_rate: f64,
    /// Per time-series channel, raw units.
    pub feature_means: Vec<f64>,
    /// Per-channel standard deviation, raw units.
    pub feature_spreads: Vec<f64>,
    pub shared_weights: Vec<f64>,
    pub specific_weights: Vec<f64>,
    /// Per-hour mean shift of doomed patients, in standard deviations along
    /// the domain direction.
    pub drift_rate: f64,
    /// Probability that a channel has no measurement in a given hour.
    pub missingness: Vec<f64>,
    pub age_mean: f64,
    pub male_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCohortSpec {
    pub domains: Vec<SynthDomainSpec>,
    /// AR(1) coefficient of the hourly noise.
    pub ar_coef: f64,
    /// First record id; patients are numbered consecutively from here.
    pub first_id: u64,
}

/// Generator ground truth for one patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientTruth {
    pub patient_id: String,
    pub domain: Domain,
    pub outcome: bool,
    /// Posterior death probability after observing hours `0..=h`, from the
    /// complete (pre-missingness) trajectory.
    pub latent_risk: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub records: Vec<PatientRecord>,
    pub truth: Vec<PatientTruth>,
}

/// Table I style statistics: mean and quartiles per domain in the order
/// Cardiac, Coronary, Medical, Surgical.
type Row = (&'static str, [(f64, f64, f64); 4]);

const TABLE: [Row; 31] = [
    (
        "Albumin",
        [
            (2.92, 2.4, 3.5),
            (3.31, 2.9, 3.6),
            (2.92, 2.5, 3.3),
            (2.99, 2.5, 3.5),
        ],
    ),
    (
        "ALP",
        [
            (74.93, 46.0, 83.0),
            (92.44, 59.0, 102.0),
            (126.15, 64.0, 138.0),
            (91.43, 52.0, 96.0),
        ],
    ),
    (
        "ALT",
        [
            (28.70, 18.0, 45.0),
            (68.14, 19.0, 78.0),
            (45.17, 16.0, 61.0),
            (72.11, 17.0, 84.0),
        ],
    ),
    (
        "AST",
        [
            (37.19, 28.0, 56.0),
            (32.41, 26.0, 55.0),
            (42.14, 24.0, 57.0),
            (34.90, 24.0, 53.0),
        ],
    ),
    (
        "Bilirubin",
        [
            (1.01, 0.4, 1.1),
            (0.87, 0.4, 0.9),
            (2.44, 0.4, 1.6),
            (1.85, 0.5, 1.5),
        ],
    ),
    (
        "Cholesterol",
        [
            (150.14, 114.0, 174.0),
            (163.59, 134.0, 189.0),
            (141.04, 111.0, 169.0),
            (157.87, 122.0, 184.0),
        ],
    ),
    (
        "Creatinine",
        [
            (1.04, 0.7, 1.1),
            (1.58, 0.8, 1.6),
            (1.64, 0.7, 1.7),
            (1.12, 0.7, 1.1),
        ],
    ),
    (
        "DiasABP",
        [
            (58.85, 51.0, 66.0),
            (62.65, 53.0, 74.0),
            (54.97, 48.0, 70.0),
            (59.65, 52.0, 72.0),
        ],
    ),
    (
        "FiO2",
        [
            (0.91, 1.0, 1.0),
            (0.82, 0.5, 1.0),
            (0.72, 0.5, 1.0),
            (0.72, 0.5, 1.0),
        ],
    ),
    (
        "Glucose",
        [
            (129.28, 103.0, 145.0),
            (165.74, 114.0, 191.0),
            (155.02, 104.0, 175.0),
            (148.85, 114.0, 167.0),
        ],
    ),
    (
        "HCO3",
        [
            (23.41, 22.0, 25.0),
            (23.31, 21.0, 26.0),
            (22.74, 19.0, 26.0),
            (23.44, 21.0, 26.0),
        ],
    ),
    (
        "HCT",
        [
            (29.32, 25.3, 32.8),
            (34.48, 30.7, 37.8),
            (31.82, 27.9, 36.0),
            (33.01, 29.1, 36.8),
        ],
    ),
    (
        "HR",
        [
            (85.43, 79.0, 91.0),
            (84.32, 69.0, 97.0),
            (95.61, 80.0, 110.0),
            (87.83, 74.0, 100.0),
        ],
    ),
    (
        "K",
        [
            (4.49, 4.0, 4.7),
            (4.28, 3.8, 4.5),
            (4.19, 3.6, 4.5),
            (4.07, 3.6, 4.3),
        ],
    ),
    (
        "Lactate",
        [
            (2.76, 1.5, 3.3),
            (2.76, 1.4, 3.0),
            (2.58, 1.3, 2.8),
            (2.65, 1.3, 3.1),
        ],
    ),
    (
        "MAP",
        [
            (78.86, 69.0, 86.0),
            (86.14, 73.0, 99.0),
            (86.58, 68.0, 96.0),
            (87.13, 73.0, 98.0),
        ],
    ),
    (
        "Na",
        [
            (138.42, 136.0, 140.0),
            (137.82, 135.0, 140.0),
            (138.96, 136.0, 142.0),
            (139.33, 137.0, 142.0),
        ],
    ),
    (
        "NIDiasABP",
        [
            (52.21, 44.0, 59.0),
            (61.15, 49.0, 72.0),
            (62.03, 50.0, 72.0),
            (62.42, 52.0, 73.0),
        ],
    ),
    (
        "NIMAP",
        [
            (71.53, 62.0, 79.0),
            (78.93, 67.0, 89.0),
            (80.55, 68.0, 91.0),
            (82.78, 71.0, 94.0),
        ],
    ),
    (
        "NISysABP",
        [
            (110.88, 96.0, 125.0),
            (117.46, 101.0, 134.0),
            (121.78, 104.0, 138.0),
            (126.72, 108.0, 145.0),
        ],
    ),
    (
        "PaCO2",
        [
            (41.20, 36.0, 45.0),
            (40.61, 35.0, 45.0),
            (42.50, 34.0, 48.0),
            (41.01, 35.0, 45.0),
        ],
    ),
    (
        "PaO2",
        [
            (295.46, 218.0, 387.0),
            (181.58, 89.0, 248.0),
            (147.68, 78.0, 185.0),
            (188.24, 101.0, 250.0),
        ],
    ),
    (
        "pH",
        [
            (7.39, 7.35, 7.44),
            (7.84, 7.31, 7.43),
            (7.44, 7.3, 7.42),
            (7.46, 7.32, 7.43),
        ],
    ),
    (
        "Platelets",
        [
            (170.36, 117.0, 208.0),
            (241.44, 181.0, 283.0),
            (230.89, 143.0, 287.0),
            (219.19, 150.0, 268.0),
        ],
    ),
    (
        "RespRate",
        [
            (17.55, 14.0, 20.0),
            (19.74, 16.0, 23.0),
            (21.10, 17.0, 24.0),
            (18.95, 16.0, 21.0),
        ],
    ),
    (
        "SysABP",
        [
            (117.16, 105.0, 127.0),
            (117.65, 100.0, 139.0),
            (107.45, 95.0, 137.0),
            (123.33, 108.0, 148.0),
        ],
    ),
    (
        "Temp",
        [
            (35.57, 35.5, 36.6),
            (36.38, 36.0, 37.1),
            (36.77, 36.2, 37.4),
            (36.51, 36.1, 37.4),
        ],
    ),
    (
        "TroponinI",
        [
            (6.77, 0.8, 10.1),
            (10.05, 0.8, 12.4),
            (5.59, 0.8, 7.0),
            (7.02, 0.4, 6.7),
        ],
    ),
    (
        "TroponinT",
        [
            (1.51, 0.04, 0.59),
            (2.78, 0.17, 2.8),
            (0.33, 0.04, 0.25),
            (0.22, 0.03, 0.14),
        ],
    ),
    (
        "Urine",
        [
            (497.92, 120.0, 615.0),
            (365.62, 100.0, 500.0),
            (255.39, 70.0, 325.0),
            (389.29, 100.0, 500.0),
        ],
    ),
    (
        "WBC",
        [
            (12.98, 9.2, 15.5),
            (12.31, 8.5, 14.3),
            (13.33, 7.8, 17.0),
            (12.37, 8.4, 15.1),
        ],
    ),
];

/// Channels absent from the table, shared by all domains.
const EXTRA: [(&str, f64, f64, f64); 6] = [
    ("BUN", 27.0, 13.0, 33.0),
    ("GCS", 11.5, 8.0, 15.0),
    ("Mg", 2.0, 1.8, 2.2),
    ("MechVent", 1.0, 1.0, 1.0),
    ("SaO2", 96.6, 96.0, 99.0),
    ("Weight", 82.0, 67.0, 95.0),
];

/// Sizes, mortality rates, age means and male fractions per domain.
const POPULATION: [(Domain, usize, f64, f64, f64); 4] = [
    (Domain::Cardiac, 874, 0.049, 67.91, 0.606),
    (Domain::Coronary, 577, 0.140, 69.22, 0.577),
    (Domain::Medical, 1481, 0.186, 62.83, 0.508),
    (Domain::Surgical, 1067, 0.145, 60.50, 0.590),
];

/// Domain-specific channel that also drifts for doomed patients.
fn specific_channel(d: Domain) -> &'static str {
    match d {
        Domain::Cardiac => "PaCO2",
        Domain::Coronary => "TroponinT",
        Domain::Medical => "BUN",
        Domain::Surgical => "Creatinine",
    }
}

fn default_missingness(name: &str) -> f64 {
    match name {
        "HR" | "MAP" | "SysABP" | "DiasABP" | "NIMAP" | "NISysABP" | "NIDiasABP" | "RespRate" => {
            0.15
        }
        "Urine" | "Temp" | "GCS" | "FiO2" | "Weight" | "SaO2" => 0.4,
        "Lactate" | "Glucose" | "HCO3" | "PaCO2" | "PaO2" | "pH" => 0.6,
        "MechVent" => 0.7,
        "Albumin" | "ALP" | "ALT" | "AST" | "Bilirubin" | "Cholesterol" | "TroponinI"
        | "TroponinT" => 0.96,
        _ => 0.85,
    }
}

pub fn shared_direction() -> Vec<f64> {
    let mut w = vec![0.0; N_TIME_SERIES];
    let norm = DRIFT_CHANNELS
        .iter()
        .map(|(_, w)| w * w)
        .sum::<f64>()
        .sqrt();
    for (name, sign) in DRIFT_CHANNELS {
        w[time_series_index(name).expect("known channel")] = sign / norm;
    }
    w
}

impl SynthDomainSpec {
    /// Domain defaults seeded from the published per-domain statistics.
    pub fn reference(domain: Domain) -> Self {
        let di = domain.index();
        let mut means = vec![0.0; N_TIME_SERIES];
        let mut spreads = vec![0.0; N_TIME_SERIES];
        for (name, cols) in TABLE {
            let (m, q1, q3) = cols[di];
            let c = time_series_index(name).expect("table channel");
            means[c] = m;
            spreads[c] = ((q3 - q1) / 1.349).max(0.05 * m);
        }
        for (name, m, q1, q3) in EXTRA {
            let c = time_series_index(name).expect("extra channel");
            means[c] = m;
            spreads[c] = ((q3 - q1) / 1.349).max(0.05 * m);
        }
        let mut specific = vec![0.0; N_TIME_SERIES];
        specific[time_series_index(specific_channel(domain)).expect("known")] = 0.5;
        let mut missingness: Vec<f64> =
            TIME_SERIES.iter().map(|n| default_missingness(n)).collect();
        match domain {
            Domain::Cardiac => missingness[time_series_index("PaCO2").expect("known")] = 0.3,
            Domain::Coronary => missingness[time_series_index("TroponinT").expect("known")] = 0.6,
            _ => {}
        }
        let (_, n, rate, age, male) = POPULATION[di];
        SynthDomainSpec {
            domain,
            n_patients: n,
            mortality_rate: rate,
            feature_means: means,
            feature_spreads: spreads,
            shared_weights: shared_direction(),
            specific_weights: specific,
            drift_rate: 0.05,
            missingness,
            age_mean: age,
            male_fraction: male,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mortality_rate >= 0.0 && self.mortality_rate < 1.0) {
            return Err(Error::config(format!(
                "{}: mortality rate {} outside [0, 1)",
                self.domain, self.mortality_rate
            )));
        }
        let lens = [
            self.feature_means.len(),
            self.feature_spreads.len(),
            self.shared_weights.len(),
            self.specific_weights.len(),
            self.missingness.len(),
        ];
        if lens.iter().any(|&l| l != N_TIME_SERIES) {
            return Err(Error::config(format!(
                "{}: per-channel vectors must have {N_TIME_SERIES} entries",
                self.domain
            )));
        }
        if self.missingness.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config(format!(
                "{}: missingness outside [0, 1]",
                self.domain
            )));
        }
        if self.feature_spreads.iter().any(|s| !(*s >= 0.0)) || !self.drift_rate.is_finite() {
            return Err(Error::config(format!(
                "{}: invalid spreads or drift",
                self.domain
            )));
        }
        if !(0.0..=1.0).contains(&self.male_fraction) {
            return Err(Error::config(format!(
                "{}: male fraction outside [0, 1]",
                self.domain
            )));
        }
        Ok(())
    }

    fn direction(&self) -> Vec<f64> {
        self.shared_weights
            .iter()
            .zip(&self.specific_weights)
            .map(|(a, b)| a + b)
            .collect()
    }
}

impl SynthCohortSpec {
    /// Four domains with the published sizes and mortality rates.
    pub fn reference() -> Self {
        SynthCohortSpec {
            domains: Domain::ALL
                .iter()
                .map(|&d| SynthDomainSpec::reference(d))
                .collect(),
            ar_coef: 0.7,
            first_id: 200_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::config("synthetic cohort needs at least one domain"));
        }
        if !(0.0..1.0).contains(&self.ar_coef) {
            return Err(Error::config("ar_coef must lie in [0, 1)"));
        }
        for d in &self.domains {
            d.validate()?;
        }
        let shared = &self.domains[0].shared_weights;
        if self.domains.iter().any(|d| &d.shared_weights != shared) {
            return Err(Error::config(
                "shared_weights must be identical across domains",
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SynthCohortSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Generates every patient of every domain. Patient `k` (cohort-wide index)
/// draws from its own stream derived from `seed` and `k`.
pub fn generate_cohort(spec: &SynthCohortSpec, seed: u64) -> Result<SynthCohort> {
    spec.validate()?;
    let mut records = Vec::new();
    let mut truth = Vec::new();
    let mut k = 0u64;
    for d in &spec.domains {
        for _ in 0..d.n_patients {
            let (r, t) = generate_patient(d, spec.ar_coef, spec.first_id + k, rng::derive(seed, k));
            records.push(r);
            truth.push(t);
            k += 1;
        }
    }
    Ok(SynthCohort { records, truth })
}

fn generate_patient(
    d: &SynthDomainSpec,
    phi: f64,
    id: u64,
    seed: u64,
) -> (PatientRecord, PatientTruth) {
    let mut r = rng::rng(seed);
    let outcome = r.random::<f64>() < d.mortality_rate;
    let normal = |r: &mut rng::Rng| -> f64 { StandardNormal.sample(r) };
    let innov_sd = (1.0 - phi * phi).sqrt();
    let dir = d.direction();
    let mechvent = time_series_index("MechVent").expect("known");

    let age = (d.age_mean + 15.0 * normal(&mut r))
        .clamp(18.0, 90.0)
        .round();
    let gender = if r.random::<f64>() < d.male_fraction {
        1.0
    } else {
        0.0
    };
    let height = (170.0 + 10.0 * normal(&mut r)).round();
    let weight = ((80.0 + 15.0 * normal(&mut r)) * 10.0).round() / 10.0;

    let mut z = vec![0.0; N_TIME_SERIES];
    let mut z_prev = vec![0.0; N_TIME_SERIES];
    let mut llr = 0.0;
    let mut latent = Vec::with_capacity(N_HOURS);
    let prior = (d.mortality_rate.max(1e-12) / (1.0 - d.mortality_rate)).ln();
    let mut measurements = Vec::new();

    for h in 0..N_HOURS {
        for c in 0..N_TIME_SERIES {
            let e = normal(&mut r);
            z[c] = if h == 0 {
                e
            } else {
                phi * z_prev[c] + innov_sd * e
            };
        }
        for c in 0..N_TIME_SERIES {
            // Mean offset of a doomed patient at this hour and the previous one.
            let mu = d.drift_rate * h as f64 * dir[c];
            let u = z[c] + if outcome { mu } else { 0.0 };
            if dir[c] != 0.0 {
                let (a, e) = if h == 0 {
                    (mu, u)
                } else {
                    let mu_prev = d.drift_rate * (h - 1) as f64 * dir[c];
                    let u_prev = z_prev[c] + if outcome { mu_prev } else { 0.0 };
                    (
                        (mu - phi * mu_prev) / innov_sd,
                        (u - phi * u_prev) / innov_sd,
                    )
                };
                llr += a * e - 0.5 * a * a;
            }
            let observed = r.random::<f64>() >= d.missingness[c];
            let minute = h as u32 * 60 + r.random_range(0..60u32);
            if observed {
                let value = if c == mechvent {
                    1.0
                } else {
                    let v = d.feature_means[c] + d.feature_spreads[c] * u;
                    (v.max(0.0) * 1e4).round() / 1e4
                };
                measurements.push(Measurement {
                    minute,
                    param: c,
                    value,
                });
            }
        }
        latent.push(sigmoid(prior + llr));
        std::mem::swap(&mut z, &mut z_prev);
    }
    measurements.sort_by_key(|m| m.minute);

    let patient_id = id.to_string();
    (
        PatientRecord {
            patient_id: patient_id.clone(),
            age: Some(age),
            gender: Some(gender),
            height: Some(height),
            weight: Some(weight),
            domain: d.domain,
            measurements,
            outcome,
        },
        PatientTruth {
            patient_id,
            domain: d.domain,
            outcome,
            latent_risk: latent,
        },
    )
}

/// AUC of the ground-truth risk after the first `hours` hours.
pub fn oracle_auc(truth: &[PatientTruth], hours: usize) -> Result<f64> {
    if hours == 0 || hours > N_HOURS {
        return Err(Error::usage(format!("hours {hours} outside 1..={N_HOURS}")));
    }
    let scores: Vec<f64> = truth.iter().map(|t| t.latent_risk[hours - 1]).collect();
    let labels: Vec<bool> = truth.iter().map(|t| t.outcome).collect();
    auc(&scores, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, rate: f64, drift: f64) -> SynthCohortSpec {
        let mut d = SynthDomainSpec::reference(Domain::Medical);
        d.n_patients = n;
        d.mortality_rate = rate;
        d.drift_rate = drift;
        SynthCohortSpec {
            domains: vec![d],
            ar_coef: 0.7,
            first_id: 1,
        }
    }

    #[test]
    fn same_seed_same_cohort() {
        let s = small(30, 0.3, 0.05);
        assert_eq!(
            generate_cohort(&s, 4).unwrap(),
            generate_cohort(&s, 4).unwrap()
        );
        assert_ne!(
            generate_cohort(&s, 4).unwrap(),
            generate_cohort(&s, 5).unwrap()
        );
    }

    #[test]
    fn full_missingness_removes_channel() {
        let mut s = small(40, 0.3, 0.05);
        let hr = time_series_index("HR").unwrap();
        s.domains[0].missingness[hr] = 1.0;
        let c = generate_cohort(&s, 1).unwrap();
        assert!(c
            .records
            .iter()
            .all(|r| r.measurements.iter().all(|m| m.param != hr)));
    }

    #[test]
    fn zero_rate_all_survive() {
        let c = generate_cohort(&small(50, 0.0, 0.05), 2).unwrap();
        assert!(c.records.iter().all(|r| !r.outcome));
    }

    #[test]
    fn invalid_rate_rejected() {
        let s = small(5, 1.5, 0.05);
        assert!(matches!(generate_cohort(&s, 0), Err(Error::Config(_))));
    }

    #[test]
    fn shared_weights_must_agree() {
        let mut s = SynthCohortSpec::reference();
        s.domains[1].shared_weights[0] = 0.3;
        assert!(s.validate().is_err());
    }

    #[test]
    fn values_are_non_negative() {
        let c = generate_cohort(&small(30, 0.5, 0.2), 8).unwrap();
        assert!(c
            .records
            .iter()
            .flat_map(|r| &r.measurements)
            .all(|m| m.value >= 0.0));
    }

    #[test]
    fn oracle_auc_grows_with_time() {
        let c = generate_cohort(&small(400, 0.3, 0.05), 3).unwrap();
        assert_eq!(oracle_auc(&c.truth, 1).unwrap(), 0.5);
        let late = oracle_auc(&c.truth, 48).unwrap();
        assert!(late > 0.95, "oracle AUC at 48h {late}");
        assert!(oracle_auc(&c.truth, 0).is_err());
    }

    #[test]
    fn oracle_auc_monotone_in_drift() {
        let aucs: Vec<f64> = [0.005, 0.01, 0.02]
            .iter()
            .map(|&dr| {
                oracle_auc(&generate_cohort(&small(400, 0.3, dr), 6).unwrap().truth, 48).unwrap()
            })
            .collect();
        assert!(aucs[0] < aucs[1] && aucs[1] < aucs[2], "{aucs:?}");
    }
}
