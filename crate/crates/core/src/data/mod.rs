//! Patient records, PhysioNet I/O, hourly resampling, imputation and folds.

pub mod cohort;
pub mod folds;
pub mod impute;
pub mod physionet;
pub mod record;
pub mod resample;

pub use cohort::{Cohort, CohortEntry, DomainSummary};
pub use folds::{make_folds, FoldKey, FoldPlan, FoldSpec, N_FOLDS};
pub use impute::{fill_and_impute, impute_grid, EpisodeTensor, ScalingStats};
pub use physionet::{parse_physionet, write_physionet, ParsedDirectory};
pub use record::{
    channel_index, channel_name, Domain, Measurement, PatientRecord, N_CHANNELS, N_HOURS,
    N_TIME_SERIES, STATIC_CHANNELS, TIME_SERIES,
};
pub use resample::{resample_hourly, RawGrid};
