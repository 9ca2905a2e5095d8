use crate::error::{Error, Result};
use crate::survival::{StepFunction, SurvivalTarget};

use super::concordance::check_inputs;
use super::{Metric, MetricResult};

pub const AUC_TIME_POINTS: usize = 5;
pub const AUC_LOWER_PERCENTILE: f64 = 10.0;
pub const AUC_UPPER_PERCENTILE: f64 = 90.0;

/// Returns the AUC and the number of case/control pairs.
fn weighted_auc(risks: &[f64], targets: &[SurvivalTarget], censor: &StepFunction, time: f64) -> Result<(f64, u64)> {
    check_inputs(risks, targets)?;
    let mut controls: Vec<f64> = risks
        .iter()
        .zip(targets)
        .filter(|(_, t)| t.time > time)
        .map(|(&r, _)| r)
        .collect();
    controls.sort_by(f64::total_cmp);
    let mut n_cases = 0u64;
    let (mut num, mut den) = (0.0, 0.0);
    for (&r, target) in risks.iter().zip(targets) {
        if !(target.event && target.time <= time) {
            continue;
        }
        let g = censor.eval(target.time);
        if !(g > 0.0) {
            return Err(Error::Degenerate(format!(
                "censoring survival is zero at case time {} (AUC at t={time})",
                target.time
            )));
        }
        let w = 1.0 / g;
        let below = controls.partition_point(|&c| c < r);
        let not_above = controls.partition_point(|&c| c <= r);
        num += w * (below as f64 + 0.5 * (not_above - below) as f64);
        den += w * controls.len() as f64;
        n_cases += 1;
    }
    if n_cases == 0 {
        return Err(Error::Degenerate(format!("no cases at t={time}")));
    }
    if controls.is_empty() {
        return Err(Error::Degenerate(format!("no controls at t={time}")));
    }
    Ok((num / den, n_cases * controls.len() as u64))
}

/// Cumulative/dynamic AUC at `time` with inverse-probability-of-censoring
/// weights for the cases. `censor` is the censoring survival function
/// estimated on the training fold.
pub fn dynamic_auc(risks: &[f64], targets: &[SurvivalTarget], censor: &StepFunction, time: f64) -> Result<f64> {
    weighted_auc(risks, targets, censor, time).map(|(v, _)| v)
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Evaluation times: equally spaced over the 10th to 90th percentile of the
/// observed event times.
pub fn auc_time_grid(targets: &[SurvivalTarget]) -> Result<Vec<f64>> {
    let mut times: Vec<f64> = targets.iter().filter(|t| t.event).map(|t| t.time).collect();
    times.sort_by(f64::total_cmp);
    let mut distinct = times.clone();
    distinct.dedup();
    if distinct.len() < AUC_TIME_POINTS {
        return Err(Error::Degenerate(format!(
            "mean dynamic AUC needs {AUC_TIME_POINTS} distinct event times, found {}",
            distinct.len()
        )));
    }
    let lo = percentile(&times, AUC_LOWER_PERCENTILE);
    let hi = percentile(&times, AUC_UPPER_PERCENTILE);
    let step = (hi - lo) / (AUC_TIME_POINTS - 1) as f64;
    Ok((0..AUC_TIME_POINTS).map(|k| lo + step * k as f64).collect())
}

/// Mean of the dynamic AUC over the time grid. Degenerate time points are
/// dropped with a warning.
pub fn mean_dynamic_auc(risks: &[f64], targets: &[SurvivalTarget], censor: &StepFunction) -> Result<MetricResult> {
    check_inputs(risks, targets)?;
    let grid = auc_time_grid(targets)?;
    let (mut total, mut used, mut pairs) = (0.0, 0usize, 0u64);
    for &t in &grid {
        match weighted_auc(risks, targets, censor, t) {
            Ok((v, n)) => {
                total += v;
                used += 1;
                pairs += n;
            }
            Err(e) if e.is_numerical() => log::warn!("dropping AUC time point {t}: {e}"),
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::Degenerate("every dynamic AUC time point was degenerate".into()));
    }
    Ok(MetricResult { metric: Metric::MeanDynamicAuc, value: total / used as f64, n_comparable: pairs })
}
