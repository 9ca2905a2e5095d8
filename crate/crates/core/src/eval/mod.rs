//! Discrimination metrics and paired significance tests.

mod auc;
mod concordance;
mod stats;

use serde::{Deserialize, Serialize};

pub use auc::{
    auc_time_grid, dynamic_auc, mean_dynamic_auc, percentile, AUC_LOWER_PERCENTILE, AUC_TIME_POINTS,
    AUC_UPPER_PERCENTILE,
};
pub use concordance::c_index;
pub use stats::{bonferroni, paired_t, wilcoxon_signed_rank, Alternative, TestMethod, TestResult, WILCOXON_EXACT_MAX_N};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    CIndex,
    MeanDynamicAuc,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::CIndex, Metric::MeanDynamicAuc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::CIndex => "c_index",
            Metric::MeanDynamicAuc => "mean_auc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: Metric,
    pub value: f64,
    /// Comparable pairs (C-index) or case/control pairs summed over time points (AUC).
    pub n_comparable: u64,
}
