use serde::{Deserialize, Serialize};

use crate::data::record::{PatientRecord, N_CHANNELS, N_HOURS, N_TIME_SERIES};

/// Hourly grid of raw (unscaled) values; `None` where nothing was measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawGrid {
    pub n_hours: usize,
    pub n_channels: usize,
    pub cells: Vec<Option<f64>>,
}

impl RawGrid {
    pub fn empty(n_hours: usize, n_channels: usize) -> Self {
        RawGrid {
            n_hours,
            n_channels,
            cells: vec![None; n_hours * n_channels],
        }
    }

    #[inline]
    pub fn get(&self, hour: usize, channel: usize) -> Option<f64> {
        self.cells[hour * self.n_channels + channel]
    }

    #[inline]
    pub fn set(&mut self, hour: usize, channel: usize, v: Option<f64>) {
        self.cells[hour * self.n_channels + channel] = v;
    }

    pub fn mask(&self) -> Vec<bool> {
        self.cells.iter().map(Option::is_some).collect()
    }

    pub fn is_observed(&self, hour: usize, channel: usize) -> bool {
        self.get(hour, channel).is_some()
    }
}

/// Last measurement of each parameter within each hour (ties: latest
/// timestamp, then last listed). Static descriptors occupy hour 0 of their
/// channels. Minutes at or beyond 48h land in the final hour.
pub fn resample_hourly(record: &PatientRecord) -> RawGrid {
    let mut grid = RawGrid::empty(N_HOURS, N_CHANNELS);
    let mut ms = record.measurements.clone();
    ms.sort_by_key(|m| m.minute);
    for m in ms {
        let hour = ((m.minute / 60) as usize).min(N_HOURS - 1);
        grid.set(hour, m.param, Some(m.value));
    }
    for (i, v) in record.statics().into_iter().enumerate() {
        grid.set(0, N_TIME_SERIES + i, v);
    }
    grid
}
