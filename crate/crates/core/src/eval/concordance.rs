use crate::error::{Error, Result};
use crate::survival::SurvivalTarget;

use super::{Metric, MetricResult};

pub(crate) fn check_inputs(risks: &[f64], targets: &[SurvivalTarget]) -> Result<()> {
    if risks.len() != targets.len() {
        return Err(Error::InvalidInput(format!(
            "{} risk scores for {} targets",
            risks.len(),
            targets.len()
        )));
    }
    if let Some(i) = risks.iter().position(|r| !r.is_finite()) {
        return Err(Error::InvalidInput(format!("risk score {i} is not finite")));
    }
    Ok(())
}

struct Counts {
    tree: Vec<u64>,
}

impl Counts {
    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks `< rank`.
    fn below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut c = 0;
        while i > 0 {
            c += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        c
    }
}

/// Harrell's concordance index.
///
/// A pair is comparable when the shorter observed time ends in an event; an
/// event and a censoring at the same time are comparable, two events at the
/// same time are not. The earlier row should carry the higher risk; risk
/// ties count one half.
pub fn c_index(risks: &[f64], targets: &[SurvivalTarget]) -> Result<MetricResult> {
    check_inputs(risks, targets)?;
    if targets.len() < 2 {
        return Err(Error::InvalidInput("C-index needs at least two rows".into()));
    }
    let n = risks.len();
    let mut sorted_risks = risks.to_vec();
    sorted_risks.sort_by(f64::total_cmp);
    sorted_risks.dedup();
    let rank: Vec<usize> = risks.iter().map(|r| sorted_risks.partition_point(|x| x < r)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| targets[b].time.total_cmp(&targets[a].time));
    let mut counts = Counts { tree: vec![0; sorted_risks.len() + 1] };
    let mut inserted = 0u64;
    let (mut comparable, mut twice_concordant) = (0u64, 0u64);
    let mut i = 0;
    while i < n {
        let t = targets[order[i]].time;
        let mut j = i;
        while j < n && targets[order[j]].time == t {
            j += 1;
        }
        let group = &order[i..j];
        for &k in group.iter().filter(|&&k| !targets[k].event) {
            counts.add(rank[k]);
            inserted += 1;
        }
        for &k in group.iter().filter(|&&k| targets[k].event) {
            let less = counts.below(rank[k]);
            let equal = counts.below(rank[k] + 1) - less;
            comparable += inserted;
            twice_concordant += 2 * less + equal;
        }
        for &k in group.iter().filter(|&&k| targets[k].event) {
            counts.add(rank[k]);
            inserted += 1;
        }
        i = j;
    }
    if comparable == 0 {
        return Err(Error::Degenerate("no comparable pairs for the C-index".into()));
    }
    Ok(MetricResult {
        metric: Metric::CIndex,
        value: twice_concordant as f64 / (2 * comparable) as f64,
        n_comparable: comparable,
    })
}
