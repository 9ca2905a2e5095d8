//! Best log-rank split of a node over one column.
//!
//! For a candidate left group `L` the two-sample log-rank numerator and
//! variance decompose into per-row terms:
//!
//! ```text
//! U = D_L - sum_{k in L} A(T_k)
//! V = sum_{k in L} B(T_k) - sum_{k, l in L} C(min(T_k, T_l))
//! ```
//!
//! with `A`, `B`, `C` cumulative sums over the node's event times of
//! `d/Y`, `c Y` and `c`, where `c = d (Y - d) / (Y^2 (Y - 1))`. Sweeping rows
//! in feature order and keeping the pair term in a Fenwick tree over time
//! ranks scores every threshold in `O(n log n)`.

use crate::survival::SurvivalTarget;

/// Scores within this relative margin are treated as ties.
pub(crate) const SCORE_TIE_RTOL: f64 = 1e-12;

pub(crate) fn improves(score: f64, best: Option<f64>) -> bool {
    match best {
        None => true,
        Some(b) => score > b + SCORE_TIE_RTOL * b.abs().max(1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub column: usize,
    pub threshold: f64,
    /// `|U| / sqrt(V)`.
    pub score: f64,
}

/// Node-level event table, computed once and shared by all candidate columns.
pub(crate) struct NodeTimes {
    /// Time rank of each node row (ranks over distinct node times).
    rank: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    n_ranks: usize,
    pub(crate) total_events: usize,
}

impl NodeTimes {
    /// `rows` index into `targets` and may repeat (bootstrap samples).
    pub(crate) fn new(rows: &[usize], targets: &[SurvivalTarget]) -> Self {
        let m = rows.len();
        let mut by_time: Vec<usize> = (0..m).collect();
        by_time.sort_by(|&x, &y| targets[rows[x]].time.total_cmp(&targets[rows[y]].time));
        let mut rank = vec![0; m];
        // per distinct time: (events, at-risk)
        let mut table: Vec<(usize, usize)> = Vec::new();
        let mut i = 0;
        while i < m {
            let t = targets[rows[by_time[i]]].time;
            let mut j = i;
            let mut d = 0;
            while j < m && targets[rows[by_time[j]]].time == t {
                d += targets[rows[by_time[j]]].event as usize;
                rank[by_time[j]] = table.len();
                j += 1;
            }
            table.push((d, m - i));
            i = j;
        }
        let n_ranks = table.len();
        let (mut a, mut b, mut c) = (Vec::with_capacity(n_ranks), Vec::with_capacity(n_ranks), Vec::with_capacity(n_ranks));
        let (mut sa, mut sb, mut sc) = (0.0, 0.0, 0.0);
        let mut total_events = 0;
        for &(d, y) in &table {
            total_events += d;
            if d > 0 {
                let (df, yf) = (d as f64, y as f64);
                sa += df / yf;
                if y > 1 {
                    let ct = df * (yf - df) / (yf * yf * (yf - 1.0));
                    sb += ct * yf;
                    sc += ct;
                }
            }
            a.push(sa);
            b.push(sb);
            c.push(sc);
        }
        NodeTimes { rank, a, b, c, n_ranks, total_events }
    }
}

struct Fenwick {
    count: Vec<f64>,
    sum: Vec<f64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick { count: vec![0.0; n + 1], sum: vec![0.0; n + 1] }
    }

    fn add(&mut self, rank: usize, value: f64) {
        let mut i = rank + 1;
        while i < self.count.len() {
            self.count[i] += 1.0;
            self.sum[i] += value;
            i += i & i.wrapping_neg();
        }
    }

    /// Count and sum over ranks `< rank`.
    fn prefix(&self, rank: usize) -> (f64, f64) {
        let (mut c, mut s) = (0.0, 0.0);
        let mut i = rank;
        while i > 0 {
            c += self.count[i];
            s += self.sum[i];
            i -= i & i.wrapping_neg();
        }
        (c, s)
    }
}

/// Best threshold for `column` among midpoints of consecutive distinct
/// values. A split is admissible when both children hold at least
/// `min_child_events` events and the log-rank variance is positive.
pub(crate) fn best_split_for_column(
    rows: &[usize],
    values: &[f64],
    targets: &[SurvivalTarget],
    times: &NodeTimes,
    column: usize,
    min_child_events: usize,
) -> Option<SplitCandidate> {
    let m = rows.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]));
    let mut fenwick = Fenwick::new(times.n_ranks);
    let (mut left_events, mut sum_a, mut sum_b, mut quad) = (0usize, 0.0, 0.0, 0.0);
    let mut in_left = 0.0;
    let mut best: Option<SplitCandidate> = None;
    let mut i = 0;
    while i < m {
        let v = values[order[i]];
        while i < m && values[order[i]] == v {
            let k = order[i];
            let r = times.rank[k];
            let ck = times.c[r];
            let (below_count, below_sum) = fenwick.prefix(r);
            let at_or_above = in_left - below_count;
            quad += 2.0 * (at_or_above * ck + below_sum) + ck;
            fenwick.add(r, ck);
            in_left += 1.0;
            left_events += targets[rows[k]].event as usize;
            sum_a += times.a[r];
            sum_b += times.b[r];
            i += 1;
        }
        if i == m {
            break;
        }
        let right_events = times.total_events - left_events;
        if left_events < min_child_events || right_events < min_child_events {
            continue;
        }
        let var = sum_b - quad;
        if !(var > 1e-12 * sum_b.abs().max(1e-300)) {
            continue;
        }
        let u = left_events as f64 - sum_a;
        let score = u.abs() / var.sqrt();
        if improves(score, best.map(|b| b.score)) {
            let next = values[order[i]];
            let mut threshold = 0.5 * (v + next);
            if threshold >= next {
                threshold = v;
            }
            best = Some(SplitCandidate { column, threshold, score });
        }
    }
    best
}

/// Best split over the given candidate columns (ascending column order wins ties).
pub fn best_logrank_split(
    rows: &[usize],
    column_values: &dyn Fn(usize, usize) -> f64,
    candidate_columns: &[usize],
    targets: &[SurvivalTarget],
    min_child_events: usize,
) -> Option<SplitCandidate> {
    let times = NodeTimes::new(rows, targets);
    let mut cols = candidate_columns.to_vec();
    cols.sort_unstable();
    let mut best: Option<SplitCandidate> = None;
    let mut values = vec![0.0; rows.len()];
    for col in cols {
        for (v, &row) in values.iter_mut().zip(rows) {
            *v = column_values(row, col);
        }
        if let Some(c) = best_split_for_column(rows, &values, targets, &times, col, min_child_events) {
            if improves(c.score, best.map(|b| b.score)) {
                best = Some(c);
            }
        }
    }
    best
}

/// Log-rank statistic `|U| / sqrt(V)` of an explicit two-group partition
/// computed directly from the event-time table. Returns `None` when the
/// variance vanishes.
pub fn logrank_statistic(groups: &[(SurvivalTarget, bool)]) -> Option<f64> {
    let mut times: Vec<f64> = groups.iter().filter(|(t, _)| t.event).map(|(t, _)| t.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let (mut u, mut v) = (0.0f64, 0.0f64);
    for t in times {
        let (mut y, mut y_l, mut d, mut d_l) = (0.0, 0.0, 0.0, 0.0);
        for (target, left) in groups {
            if target.time >= t {
                y += 1.0;
                if *left {
                    y_l += 1.0;
                }
            }
            if target.time == t && target.event {
                d += 1.0;
                if *left {
                    d_l += 1.0;
                }
            }
        }
        u += d_l - y_l * d / y;
        if y > 1.0 {
            v += y_l * (y - y_l) * d * (y - d) / (y * y * (y - 1.0));
        }
    }
    (v > 0.0).then(|| u.abs() / v.sqrt())
}
