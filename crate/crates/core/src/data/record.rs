use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hourly steps per episode.
pub const N_HOURS: usize = 48;

/// The 37 time-stamped physiological parameters, in channel order.
pub const TIME_SERIES: [&str; 37] = [
    "Albumin",
    "ALP",
    "ALT",
    "AST",
    "Bilirubin",
    "BUN",
    "Cholesterol",
    "Creatinine",
    "DiasABP",
    "FiO2",
    "GCS",
    "Glucose",
    "HCO3",
    "HCT",
    "HR",
    "K",
    "Lactate",
    "Mg",
    "MAP",
    "MechVent",
    "Na",
    "NIDiasABP",
    "NIMAP",
    "NISysABP",
    "PaCO2",
    "PaO2",
    "pH",
    "Platelets",
    "RespRate",
    "SaO2",
    "SysABP",
    "Temp",
    "TroponinI",
    "TroponinT",
    "Urine",
    "WBC",
    "Weight",
];

/// Static descriptors broadcast as constant channels after the time series.
pub const STATIC_CHANNELS: [&str; 4] = ["Age", "Gender", "Height", "AdmitWeight"];

pub const N_TIME_SERIES: usize = TIME_SERIES.len();
pub const N_CHANNELS: usize = N_TIME_SERIES + STATIC_CHANNELS.len();

/// Descriptor names that open every PhysioNet record file.
pub const DESCRIPTORS: [&str; 6] = ["RecordID", "Age", "Gender", "Height", "ICUType", "Weight"];

pub fn channel_name(c: usize) -> &'static str {
    if c < N_TIME_SERIES {
        TIME_SERIES[c]
    } else {
        STATIC_CHANNELS[c - N_TIME_SERIES]
    }
}

pub fn time_series_index(name: &str) -> Option<usize> {
    TIME_SERIES.iter().position(|&p| p == name)
}

pub fn channel_index(name: &str) -> Option<usize> {
    time_series_index(name).or_else(|| {
        STATIC_CHANNELS
            .iter()
            .position(|&p| p == name)
            .map(|i| N_TIME_SERIES + i)
    })
}

/// ICU unit type; the unit of transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    Cardiac,
    Coronary,
    Medical,
    Surgical,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::Cardiac,
        Domain::Coronary,
        Domain::Medical,
        Domain::Surgical,
    ];

    /// PhysioNet `ICUType` code: 1 Coronary Care, 2 Cardiac Surgery Recovery,
    /// 3 Medical, 4 Surgical.
    pub fn from_icu_type(code: i64) -> Option<Domain> {
        match code {
            1 => Some(Domain::Coronary),
            2 => Some(Domain::Cardiac),
            3 => Some(Domain::Medical),
            4 => Some(Domain::Surgical),
            _ => None,
        }
    }

    pub fn icu_type(self) -> i64 {
        match self {
            Domain::Coronary => 1,
            Domain::Cardiac => 2,
            Domain::Medical => 3,
            Domain::Surgical => 4,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Cardiac => "Cardiac",
            Domain::Coronary => "Coronary",
            Domain::Medical => "Medical",
            Domain::Surgical => "Surgical",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cardiac" => Ok(Domain::Cardiac),
            "coronary" => Ok(Domain::Coronary),
            "medical" => Ok(Domain::Medical),
            "surgical" => Ok(Domain::Surgical),
            _ => Err(Error::config(format!("unknown ICU domain `{s}`"))),
        }
    }
}

/// One time-stamped value of a time-series parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Minutes since admission.
    pub minute: u32,
    /// Index into [`TIME_SERIES`].
    pub param: usize,
    pub value: f64,
}

impl Measurement {
    pub fn param_name(&self) -> &'static str {
        TIME_SERIES[self.param]
    }
}

/// One patient's raw measurements, descriptors and outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub age: Option<f64>,
    /// 0 female, 1 male.
    pub gender: Option<f64>,
    pub height: Option<f64>,
    pub weight: Option<f64>,
    pub domain: Domain,
    pub measurements: Vec<Measurement>,
    /// In-hospital death.
    pub outcome: bool,
}

impl PatientRecord {
    pub fn statics(&self) -> [Option<f64>; 4] {
        [self.age, self.gender, self.height, self.weight]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dictionary_sizes() {
        assert_eq!(N_TIME_SERIES, 37);
        assert_eq!(N_CHANNELS, 41);
        assert_eq!(channel_index("Lactate"), Some(16));
        assert_eq!(channel_index("Age"), Some(37));
        assert_eq!(channel_name(40), "AdmitWeight");
    }

    #[test]
    fn icu_codes_round_trip() {
        for d in Domain::ALL {
            assert_eq!(Domain::from_icu_type(d.icu_type()), Some(d));
            assert_eq!(d.as_str().parse::<Domain>().unwrap(), d);
        }
        assert_eq!(Domain::from_icu_type(7), None);
    }
}
