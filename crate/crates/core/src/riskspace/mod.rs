//! Mortality risk space: per-hour representations, exact t-SNE and
//! trajectory dynamics.

pub mod collect;
pub mod dynamics;
pub mod tsne;

pub use collect::{collect_raw, collect_representations, PointMeta, RepresentationSet};
pub use dynamics::{dynamics, trajectories_csv, DynamicsSeries, GroupSeries};
pub use tsne::{
    conditional_probabilities, silhouette, squared_distances, tsne2d, TsneConfig, TsneResult,
};
