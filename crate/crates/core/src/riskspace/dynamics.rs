//! Distance-to-death-centroid and speed series of embedded trajectories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riskspace::collect::PointMeta;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSeries {
    pub n_patients: usize,
    /// Mean distance to the death centroid at hours `1..=T`.
    pub mean_distance: Vec<f64>,
    /// Mean displacement from hour `h` to `h + 1`, `T - 1` entries.
    pub mean_speed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSeries {
    pub centroid: [f64; 2],
    pub died: Option<GroupSeries>,
    pub survived: Option<GroupSeries>,
}

impl DynamicsSeries {
    /// `mean_distance(survived) - mean_distance(died)` per hour.
    pub fn distance_gap(&self) -> Option<Vec<f64>> {
        let (d, s) = (self.died.as_ref()?, self.survived.as_ref()?);
        Some(
            s.mean_distance
                .iter()
                .zip(&d.mean_distance)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("hour,group,mean_distance,mean_speed\n");
        for (name, g) in [("died", &self.died), ("survived", &self.survived)] {
            let Some(g) = g else { continue };
            for (h, d) in g.mean_distance.iter().enumerate() {
                let speed = if h == 0 {
                    String::new()
                } else {
                    format!("{:.6}", g.mean_speed[h - 1])
                };
                out.push_str(&format!("{},{name},{d:.6},{speed}\n", h + 1));
            }
        }
        out
    }
}

pub(crate) struct Trajectory<'a> {
    pub outcome: bool,
    pub rows: Vec<usize>,
    pub _id: &'a str,
}

/// Groups row indices by patient and checks every patient has hours `1..=T`
/// in order, with the same `T` for all.
pub(crate) fn trajectories(meta: &[PointMeta]) -> Result<Vec<Trajectory<'_>>> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_id: BTreeMap<&str, Trajectory> = BTreeMap::new();
    for (i, m) in meta.iter().enumerate() {
        let t = by_id.entry(&m.patient_id).or_insert_with(|| {
            order.push(&m.patient_id);
            Trajectory {
                outcome: m.outcome,
                rows: Vec::new(),
                _id: &m.patient_id,
            }
        });
        if m.hour != t.rows.len() + 1 {
            return Err(Error::data(format!(
                "patient {}: trajectory hours must be 1, 2, ... without gaps",
                m.patient_id
            )));
        }
        t.rows.push(i);
    }
    let out: Vec<Trajectory> = order
        .into_iter()
        .map(|id| by_id.remove(id).expect("present"))
        .collect();
    if let Some(t) = out.first() {
        let len = t.rows.len();
        if out.iter().any(|x| x.rows.len() != len) {
            return Err(Error::data("trajectories have different lengths"));
        }
    }
    Ok(out)
}

fn point(emb: &Tensor, row: usize) -> [f64; 2] {
    let r = emb.row(row);
    [r[0], r[1]]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn dynamics(meta: &[PointMeta], embedding: &Tensor) -> Result<DynamicsSeries> {
    if embedding.shape() != [meta.len(), 2] {
        return Err(Error::usage(format!(
            "embedding shape {:?} does not match {} points",
            embedding.shape(),
            meta.len()
        )));
    }
    let trajs = trajectories(meta)?;
    let died: Vec<&Trajectory> = trajs.iter().filter(|t| t.outcome).collect();
    if died.is_empty() {
        return Err(Error::data(
            "no deaths in cohort; the death centroid is undefined",
        ));
    }
    let mut centroid = [0.0; 2];
    for t in &died {
        let p = point(embedding, *t.rows.last().expect("non-empty trajectory"));
        centroid[0] += p[0] / died.len() as f64;
        centroid[1] += p[1] / died.len() as f64;
    }
    let series = |group: &[&Trajectory]| -> Option<GroupSeries> {
        if group.is_empty() {
            return None;
        }
        let hours = group[0].rows.len();
        let k = group.len() as f64;
        let mut mean_distance = vec![0.0; hours];
        let mut mean_speed = vec![0.0; hours.saturating_sub(1)];
        for t in group {
            for (h, &row) in t.rows.iter().enumerate() {
                mean_distance[h] += dist(point(embedding, row), centroid) / k;
                if h > 0 {
                    mean_speed[h - 1] +=
                        dist(point(embedding, row), point(embedding, t.rows[h - 1])) / k;
                }
            }
        }
        Some(GroupSeries {
            n_patients: group.len(),
            mean_distance,
            mean_speed,
        })
    };
    let survived: Vec<&Trajectory> = trajs.iter().filter(|t| !t.outcome).collect();
    Ok(DynamicsSeries {
        centroid,
        died: series(&died),
        survived: series(&survived),
    })
}

/// `patient_id,hour,x,y,risk,outcome,domain` rows.
pub fn trajectories_csv(meta: &[PointMeta], embedding: &Tensor) -> String {
    let mut out = String::from("patient_id,hour,x,y,risk,outcome,domain\n");
    for (i, m) in meta.iter().enumerate() {
        let p = point(embedding, i);
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{},{}\n",
            m.patient_id,
            m.hour,
            p[0],
            p[1],
            m.risk,
            u8::from(m.outcome),
            m.domain
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Domain;

    fn meta(id: &str, hours: usize, outcome: bool) -> Vec<PointMeta> {
        (1..=hours)
            .map(|hour| PointMeta {
                patient_id: id.into(),
                domain: Domain::Medical,
                hour,
                risk: 0.5,
                outcome,
            })
            .collect()
    }

    #[test]
    fn single_patient_speed_is_displacement() {
        let m = meta("1", 4, true);
        let emb = Tensor::from_vec(&[4, 2], vec![0.0, 0.0, 3.0, 4.0, 3.0, 4.0, 3.0, 5.0]).unwrap();
        let d = dynamics(&m, &emb).unwrap();
        let died = d.died.unwrap();
        assert_eq!(died.mean_speed, vec![5.0, 0.0, 1.0]);
        assert_eq!(d.centroid, [3.0, 5.0]);
        assert_eq!(died.mean_distance[3], 0.0);
        assert!(d.survived.is_none());
    }

    #[test]
    fn no_deaths_is_error() {
        let m = meta("1", 3, false);
        let emb = Tensor::zeros(&[3, 2]);
        assert!(matches!(dynamics(&m, &emb), Err(Error::Data(_))));
    }

    #[test]
    fn gaps_rejected() {
        let mut m = meta("1", 3, true);
        m.remove(1);
        assert!(dynamics(&m, &Tensor::zeros(&[2, 2])).is_err());
    }

    #[test]
    fn csv_shape() {
        let mut m = meta("1", 3, true);
        m.extend(meta("2", 3, false));
        let emb = Tensor::from_vec(&[6, 2], (0..12).map(|x| x as f64).collect()).unwrap();
        let d = dynamics(&m, &emb).unwrap();
        assert_eq!(d.to_csv().lines().count(), 1 + 6);
        assert_eq!(trajectories_csv(&m, &emb).lines().count(), 7);
        assert!(d.distance_gap().unwrap().iter().all(|g| g.is_finite()));
    }
}
