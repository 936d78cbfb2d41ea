//! Gap filling, half-window duplication, min-max scaling and zero-imputation.

use serde::{Deserialize, Serialize};

use crate::data::record::Domain;
use crate::data::resample::RawGrid;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-channel min/max over training-fold observations. `None` for channels
/// never observed in the fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStats {
    pub min: Vec<Option<f64>>,
    pub max: Vec<Option<f64>>,
}

impl ScalingStats {
    pub fn from_grids<'a>(grids: impl IntoIterator<Item = &'a RawGrid>) -> Result<Self> {
        let mut stats: Option<ScalingStats> = None;
        for g in grids {
            let s = stats.get_or_insert_with(|| ScalingStats {
                min: vec![None; g.n_channels],
                max: vec![None; g.n_channels],
            });
            if s.min.len() != g.n_channels {
                return Err(Error::data("grids disagree on channel count"));
            }
            for h in 0..g.n_hours {
                for c in 0..g.n_channels {
                    if let Some(v) = g.get(h, c) {
                        s.min[c] = Some(s.min[c].map_or(v, |m| m.min(v)));
                        s.max[c] = Some(s.max[c].map_or(v, |m| m.max(v)));
                    }
                }
            }
        }
        stats.ok_or_else(|| Error::usage("scaling statistics need at least one training patient"))
    }

    /// `min = 0`, `max = 1` on every channel.
    pub fn identity(n_channels: usize) -> Self {
        ScalingStats {
            min: vec![Some(0.0); n_channels],
            max: vec![Some(1.0); n_channels],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.min.len()
    }

    /// Min-max scaling clipped to `[0, 1]`; degenerate or unseen channels map to 0.5.
    pub fn scale(&self, channel: usize, v: f64) -> f64 {
        match (self.min[channel], self.max[channel]) {
            (Some(lo), Some(hi)) if hi > lo => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            _ => 0.5,
        }
    }

    /// Inverse of [`ScalingStats::scale`] for non-degenerate channels.
    pub fn unscale(&self, channel: usize, v: f64) -> Option<f64> {
        match (self.min[channel], self.max[channel]) {
            (Some(lo), Some(hi)) if hi > lo => Some(lo + v * (hi - lo)),
            _ => None,
        }
    }
}

/// Model-ready episode: `(T, F)` values in `[0, 1]` plus the observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTensor {
    pub patient_id: String,
    pub domain: Domain,
    pub outcome: bool,
    pub values: Tensor,
    /// Row-major `(T, F)`; true only where a measurement existed before filling.
    pub mask: Vec<bool>,
}

impl EpisodeTensor {
    pub fn n_hours(&self) -> usize {
        self.values.rows()
    }

    pub fn n_channels(&self) -> usize {
        self.values.cols()
    }

    pub fn observed(&self, hour: usize, channel: usize) -> bool {
        self.mask[hour * self.n_channels() + channel]
    }

    pub fn channel_ever_observed(&self, channel: usize) -> bool {
        (0..self.n_hours()).any(|h| self.observed(h, channel))
    }

    /// Grid holding this episode's values at its observed cells only.
    pub fn observed_grid(&self) -> RawGrid {
        let mut g = RawGrid::empty(self.n_hours(), self.n_channels());
        for (i, &m) in self.mask.iter().enumerate() {
            if m {
                g.cells[i] = Some(self.values.data()[i]);
            }
        }
        g
    }
}

/// Filled, scaled `(T, F)` matrix from a raw hourly grid.
///
/// Per channel: forward-fill then backward-fill the leading gap; when every
/// observation sits in the first half (or every one in the second half) the
/// available half is copied over the other; values are min-max scaled and
/// clipped; never-observed channels are zero.
pub fn impute_grid(grid: &RawGrid, stats: &ScalingStats) -> Result<Tensor> {
    let (t_len, f) = (grid.n_hours, grid.n_channels);
    if stats.n_channels() != f {
        return Err(Error::usage(format!(
            "scaling stats cover {} channels, grid has {f}",
            stats.n_channels()
        )));
    }
    let half = t_len / 2;
    let mut out = Tensor::zeros(&[t_len, f]);
    let mut column = vec![0.0; t_len];
    for c in 0..f {
        let observed: Vec<usize> = (0..t_len).filter(|&h| grid.is_observed(h, c)).collect();
        let Some(&first) = observed.first() else {
            continue;
        };
        let last = *observed.last().expect("non-empty");
        let mut carry = grid.get(first, c).expect("observed");
        for (h, slot) in column.iter_mut().enumerate() {
            if let Some(v) = grid.get(h, c) {
                carry = v;
            }
            *slot = carry;
        }
        if half > 0 && t_len == 2 * half {
            if last < half {
                let (a, b) = column.split_at_mut(half);
                b.copy_from_slice(a);
            } else if first >= half {
                let (a, b) = column.split_at_mut(half);
                a.copy_from_slice(b);
            }
        }
        for (h, &v) in column.iter().enumerate() {
            out.set(h, c, stats.scale(c, v));
        }
    }
    Ok(out)
}

pub fn fill_and_impute(
    patient_id: &str,
    domain: Domain,
    outcome: bool,
    grid: &RawGrid,
    stats: &ScalingStats,
) -> Result<EpisodeTensor> {
    Ok(EpisodeTensor {
        patient_id: patient_id.to_string(),
        domain,
        outcome,
        values: impute_grid(grid, stats)?,
        mask: grid.mask(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_1ch(obs: &[(usize, f64)]) -> RawGrid {
        let mut g = RawGrid::empty(48, 1);
        for &(h, v) in obs {
            g.set(h, 0, Some(v));
        }
        g
    }

    fn stats(lo: f64, hi: f64) -> ScalingStats {
        ScalingStats {
            min: vec![Some(lo)],
            max: vec![Some(hi)],
        }
    }

    #[test]
    fn never_measured_is_zero() {
        let out = impute_grid(&RawGrid::empty(48, 3), &ScalingStats::identity(3)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_half_only_is_duplicated() {
        let g = grid_1ch(&[(2, 10.0), (7, 30.0), (20, 20.0)]);
        let out = impute_grid(&g, &stats(0.0, 40.0)).unwrap();
        let col: Vec<f64> = (0..48).map(|h| out.at(h, 0)).collect();
        assert_eq!(&col[24..], &col[..24]);
        assert_eq!(col[0], 0.25); // back-filled leading gap
        assert_eq!(col[7], 0.75);
        assert_eq!(col[23], 0.5);
    }

    #[test]
    fn second_half_only_is_duplicated_backwards() {
        let g = grid_1ch(&[(30, 4.0), (40, 8.0)]);
        let out = impute_grid(&g, &stats(0.0, 8.0)).unwrap();
        let col: Vec<f64> = (0..48).map(|h| out.at(h, 0)).collect();
        assert_eq!(&col[..24], &col[24..]);
        assert_eq!(col[6], 0.5);
        assert_eq!(col[16], 1.0);
    }

    #[test]
    fn spanning_channel_is_forward_filled() {
        let g = grid_1ch(&[(5, 1.0), (30, 3.0)]);
        let out = impute_grid(&g, &stats(1.0, 3.0)).unwrap();
        assert_eq!(out.at(0, 0), 0.0);
        assert_eq!(out.at(29, 0), 0.0);
        assert_eq!(out.at(30, 0), 1.0);
        assert_eq!(out.at(47, 0), 1.0);
    }

    #[test]
    fn out_of_range_values_clip() {
        let g = grid_1ch(&[(0, 120.0), (30, 40.0)]);
        let out = impute_grid(&g, &stats(60.0, 100.0)).unwrap();
        assert_eq!(out.at(0, 0), 1.0);
        assert_eq!(out.at(47, 0), 0.0);
    }

    #[test]
    fn degenerate_channel_is_half() {
        let g = grid_1ch(&[(3, 7.0)]);
        let out = impute_grid(&g, &stats(7.0, 7.0)).unwrap();
        assert!((0..48).all(|h| out.at(h, 0) == 0.5));
    }

    #[test]
    fn idempotent_on_own_output() {
        let g = grid_1ch(&[(4, 70.0), (9, 90.0), (33, 65.0)]);
        let e = fill_and_impute("p", Domain::Cardiac, false, &g, &stats(60.0, 100.0)).unwrap();
        let again = fill_and_impute(
            "p",
            Domain::Cardiac,
            false,
            &e.observed_grid(),
            &ScalingStats::identity(1),
        )
        .unwrap();
        assert_eq!(again, e);
    }
}
