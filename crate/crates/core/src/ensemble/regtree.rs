//! Least-squares regression trees for boosting, grown level by level over
//! presorted columns.

use serde::{Deserialize, Serialize};

use super::logrank::improves;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegressionNode {
    Split { column: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RegressionNode::Split { column, threshold, left, right } => {
                    i = if x[*column] <= *threshold { *left } else { *right };
                }
                RegressionNode::Leaf { value } => return *value,
            }
        }
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first() {
            Some(RegressionNode::Split { column, threshold, .. }) => Some((*column, *threshold)),
            _ => None,
        }
    }
}

/// Column-major copy of the training features with each column's row order
/// sorted by value.
pub(crate) struct Presorted {
    pub columns: Vec<Vec<f64>>,
    pub order: Vec<Vec<u32>>,
}

impl Presorted {
    pub(crate) fn new(columns: Vec<Vec<f64>>) -> Self {
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                idx
            })
            .collect();
        Presorted { columns, order }
    }
}

const OUT: u32 = u32::MAX;

struct Frontier {
    node: usize,
    count: f64,
    sum: f64,
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    column: usize,
    threshold: f64,
}

/// Fit a tree of depth at most `max_depth` to `target` on the rows flagged in
/// `in_sample`. Splits maximize the reduction in squared error; leaves hold
/// the mean target of their rows.
pub(crate) fn fit_regression_tree(data: &Presorted, target: &[f64], in_sample: &[bool], max_depth: usize) -> RegressionTree {
    let n = target.len();
    let mut nodes: Vec<RegressionNode> = vec![RegressionNode::Leaf { value: 0.0 }];
    let mut slot: Vec<u32> = in_sample.iter().map(|&s| if s { 0 } else { OUT }).collect();
    let (mut count, mut sum) = (0.0, 0.0);
    for i in 0..n {
        if in_sample[i] {
            count += 1.0;
            sum += target[i];
        }
    }
    let mut frontier = vec![Frontier { node: 0, count, sum }];
    for _ in 0..max_depth {
        if frontier.is_empty() {
            break;
        }
        let f = frontier.len();
        let mut best: Vec<Option<Best>> = vec![None; f];
        let mut left_count = vec![0.0; f];
        let mut left_sum = vec![0.0; f];
        let mut last = vec![f64::NAN; f];
        for (c, (col, order)) in data.columns.iter().zip(&data.order).enumerate() {
            left_count.iter_mut().for_each(|x| *x = 0.0);
            left_sum.iter_mut().for_each(|x| *x = 0.0);
            for &r in order {
                let r = r as usize;
                let q = slot[r];
                if q == OUT {
                    continue;
                }
                let q = q as usize;
                let v = col[r];
                if left_count[q] > 0.0 && v > last[q] {
                    let node = &frontier[q];
                    let (nl, sl) = (left_count[q], left_sum[q]);
                    let (nr, sr) = (node.count - nl, node.sum - sl);
                    let gain = sl * sl / nl + sr * sr / nr - node.sum * node.sum / node.count;
                    if gain > 0.0 && improves(gain, best[q].map(|b| b.gain)) {
                        let mut threshold = 0.5 * (last[q] + v);
                        if threshold >= v {
                            threshold = last[q];
                        }
                        best[q] = Some(Best { gain, column: c, threshold });
                    }
                }
                left_count[q] += 1.0;
                left_sum[q] += target[r];
                last[q] = v;
            }
        }
        // children of split nodes form the next frontier
        let mut next = Vec::new();
        let mut remap: Vec<Option<(u32, u32, usize, f64)>> = vec![None; f];
        for (q, b) in best.iter().enumerate() {
            if let Some(b) = b {
                let left = nodes.len();
                nodes.push(RegressionNode::Leaf { value: 0.0 });
                nodes.push(RegressionNode::Leaf { value: 0.0 });
                nodes[frontier[q].node] =
                    RegressionNode::Split { column: b.column, threshold: b.threshold, left, right: left + 1 };
                let li = next.len() as u32;
                next.push(Frontier { node: left, count: 0.0, sum: 0.0 });
                next.push(Frontier { node: left + 1, count: 0.0, sum: 0.0 });
                remap[q] = Some((li, li + 1, b.column, b.threshold));
            } else {
                let fr = &frontier[q];
                nodes[fr.node] = RegressionNode::Leaf { value: fr.sum / fr.count };
            }
        }
        for r in 0..n {
            if slot[r] == OUT {
                continue;
            }
            match remap[slot[r] as usize] {
                Some((l, rt, column, threshold)) => {
                    let s = if data.columns[column][r] <= threshold { l } else { rt };
                    slot[r] = s;
                    next[s as usize].count += 1.0;
                    next[s as usize].sum += target[r];
                }
                None => slot[r] = OUT,
            }
        }
        frontier = next;
    }
    for fr in &frontier {
        nodes[fr.node] = RegressionNode::Leaf { value: fr.sum / fr.count };
    }
    RegressionTree { nodes }
}
