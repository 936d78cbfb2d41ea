//! Evaluation: AUC, significance tests, dynamic-prediction curves and reports.

pub mod curves;
pub mod metrics;
pub mod report;
pub mod stats;

pub use curves::{
    auc_vs_hours, curve_from_risks, default_grid, gains_table, hourly_risks, AucCurve, CurveTable,
};
pub use metrics::{auc, midranks, spearman};
pub use report::{CellSummary, ExperimentReport, ReportRow};
pub use stats::{inc_beta, is_significant, ln_gamma, paired_ttest, t_cdf, SIGNIFICANCE};
