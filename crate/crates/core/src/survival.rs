//! Right-censored survival targets, train/validation/test splitting and the
//! nonparametric estimators shared by the models and metrics.
//!
//! Ties: events at time `t` are counted before censorings at `t`, so a row
//! censored at `t` is still at risk for events at `t`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const DAYS_PER_YEAR: f64 = 365.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTarget {
    /// Days since transplant.
    pub time: f64,
    /// `true` when graft loss was observed, `false` when censored at `time`.
    pub event: bool,
}

impl SurvivalTarget {
    pub fn new(time: f64, event: bool) -> Result<Self> {
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::InvalidInput(format!("survival time must be finite and >= 0, got {time}")));
        }
        Ok(SurvivalTarget { time, event })
    }

    pub fn event(time: f64) -> Self {
        SurvivalTarget { time, event: true }
    }

    pub fn censored(time: f64) -> Self {
        SurvivalTarget { time, event: false }
    }
}

pub fn count_events(targets: &[SurvivalTarget]) -> usize {
    targets.iter().filter(|t| t.event).count()
}

/// Design matrix paired with survival targets and record identifiers.
#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    pub features: FeatureMatrix,
    pub targets: Vec<SurvivalTarget>,
    pub row_ids: Vec<String>,
}

impl SurvivalDataset {
    pub fn new(features: FeatureMatrix, targets: Vec<SurvivalTarget>, row_ids: Vec<String>) -> Result<Self> {
        if features.n_rows() != targets.len() || targets.len() != row_ids.len() {
            return Err(Error::InvalidInput(format!(
                "dataset size mismatch: {} feature rows, {} targets, {} ids",
                features.n_rows(),
                targets.len(),
                row_ids.len()
            )));
        }
        Ok(SurvivalDataset { features, targets, row_ids })
    }

    /// Builds a dataset with generated row ids, mostly useful in tests.
    pub fn from_parts(features: FeatureMatrix, targets: Vec<SurvivalTarget>) -> Result<Self> {
        let ids = (0..targets.len()).map(|i| i.to_string()).collect();
        Self::new(features, targets, ids)
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn require_events(&self) -> Result<()> {
        if count_events(&self.targets) == 0 {
            Err(Error::NoEvents)
        } else {
            Ok(())
        }
    }
}

/// One random 60/20/20 partition of row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_idx: Vec<usize>,
    pub valid_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl SplitPlan {
    /// Training plus validation rows, the set used for the final refit.
    pub fn train_valid_idx(&self) -> Vec<usize> {
        let mut v = self.train_idx.clone();
        v.extend_from_slice(&self.valid_idx);
        v
    }
}

/// Draws `n_repeats` partitions. Repeat `i` is seeded with `master_seed + i`
/// through ChaCha8, so plans are reproducible across machines.
pub fn make_splits(n_rows: usize, n_repeats: usize, master_seed: u64) -> Result<Vec<SplitPlan>> {
    if n_rows < 10 {
        return Err(Error::InvalidInput(format!(
            "need at least 10 rows to build a 60/20/20 split, got {n_rows}"
        )));
    }
    if n_repeats == 0 {
        return Err(Error::InvalidInput("n_repeats must be at least 1".into()));
    }
    let n_train = (0.6 * n_rows as f64).round() as usize;
    let n_valid = (0.2 * n_rows as f64).round() as usize;
    Ok((0..n_repeats as u64)
        .map(|i| {
            let seed = master_seed.wrapping_add(i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx: Vec<usize> = (0..n_rows).collect();
            idx.shuffle(&mut rng);
            let test_idx = idx.split_off(n_train + n_valid);
            let valid_idx = idx.split_off(n_train);
            SplitPlan { seed, train_idx: idx, valid_idx, test_idx }
        })
        .collect())
}

/// Right-continuous step function: `eval(t)` returns the value of the last
/// knot at or before `t`, or `baseline` before the first knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    times: Vec<f64>,
    values: Vec<f64>,
    baseline: f64,
}

impl StepFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>, baseline: f64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput("step function times and values differ in length".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("step function times must be strictly increasing".into()));
        }
        Ok(StepFunction { times, values, baseline })
    }

    pub fn constant(value: f64) -> Self {
        StepFunction { times: Vec::new(), values: Vec::new(), baseline: value }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => self.baseline,
            k => self.values[k - 1],
        }
    }

    /// Sum of `eval` over a sorted slice of query times, in one merge pass.
    pub fn sum_over_sorted(&self, sorted_times: &[f64]) -> f64 {
        let mut k = 0;
        let mut current = self.baseline;
        let mut total = 0.0;
        for &t in sorted_times {
            while k < self.times.len() && self.times[k] <= t {
                current = self.values[k];
                k += 1;
            }
            total += current;
        }
        total
    }
}

/// Distinct times (ascending) with `(events, at_risk)` per time, where
/// `at_risk` counts rows with `time >= t`.
pub(crate) fn event_table(targets: &[SurvivalTarget]) -> Vec<(f64, usize, usize)> {
    let mut sorted: Vec<SurvivalTarget> = targets.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    let n = sorted.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let t = sorted[i].time;
        let mut j = i;
        let mut events = 0;
        while j < n && sorted[j].time == t {
            events += sorted[j].event as usize;
            j += 1;
        }
        out.push((t, events, n - i));
        i = j;
    }
    out
}

/// Product-limit estimate of the event-time survival function. Knots sit at
/// distinct event times; baseline is 1.
pub fn kaplan_meier(targets: &[SurvivalTarget]) -> StepFunction {
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut s = 1.0;
    for (t, d, n) in event_table(targets) {
        if d > 0 {
            s *= 1.0 - d as f64 / n as f64;
            times.push(t);
            values.push(s);
        }
    }
    StepFunction { times, values, baseline: 1.0 }
}

/// Kaplan-Meier estimate of `G(t) = P(C > t)` with censorings treated as the
/// events. Rows with an event at `t` leave the risk set before censorings at
/// `t` are counted.
pub fn censoring_survival(targets: &[SurvivalTarget]) -> StepFunction {
    let mut sorted: Vec<SurvivalTarget> = targets.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    let n = sorted.len();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut g = 1.0;
    let mut i = 0;
    while i < n {
        let t = sorted[i].time;
        let mut j = i;
        let mut events = 0;
        let mut censored = 0;
        while j < n && sorted[j].time == t {
            if sorted[j].event {
                events += 1;
            } else {
                censored += 1;
            }
            j += 1;
        }
        if censored > 0 {
            let at_risk = n - i - events;
            g *= 1.0 - censored as f64 / at_risk as f64;
            times.push(t);
            values.push(g);
        }
        i = j;
    }
    StepFunction { times, values, baseline: 1.0 }
}

/// Nelson-Aalen cumulative hazard `H(t) = sum_{t_i <= t} d_i / n_i`.
pub fn nelson_aalen(targets: &[SurvivalTarget]) -> StepFunction {
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut h = 0.0;
    for (t, d, n) in event_table(targets) {
        if d > 0 {
            h += d as f64 / n as f64;
            times.push(t);
            values.push(h);
        }
    }
    StepFunction { times, values, baseline: 0.0 }
}

/// Sorted distinct event times.
pub fn distinct_event_times(targets: &[SurvivalTarget]) -> Vec<f64> {
    let mut t: Vec<f64> = targets.iter().filter(|t| t.event).map(|t| t.time).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}
