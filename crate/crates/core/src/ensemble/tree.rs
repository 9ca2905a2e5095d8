//! Survival trees grown on log-rank splits.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::logrank::{best_split_for_column, improves, NodeTimes, SplitCandidate};
use crate::features::FeatureMatrix;
use crate::survival::{nelson_aalen, StepFunction, SurvivalTarget};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SurvivalNode {
    /// Rows with `x[column] <= threshold` go to `left`.
    Split { column: usize, threshold: f64, left: usize, right: usize },
    /// Nelson-Aalen hazard of the leaf's training rows and its sum over the
    /// training event times.
    Leaf { hazard: StepFunction, score: f64 },
}

/// Node arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTree {
    pub nodes: Vec<SurvivalNode>,
}

impl SurvivalTree {
    pub fn leaf_for(&self, x: &[f64]) -> (&StepFunction, f64) {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                SurvivalNode::Split { column, threshold, left, right } => {
                    i = if x[*column] <= *threshold { *left } else { *right };
                }
                SurvivalNode::Leaf { hazard, score } => return (hazard, *score),
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, SurvivalNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[SurvivalNode], i: usize) -> usize {
            match &nodes[i] {
                SurvivalNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                SurvivalNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

pub(crate) struct GrowParams<'a> {
    pub features: &'a FeatureMatrix,
    pub targets: &'a [SurvivalTarget],
    pub event_times: &'a [f64],
    pub max_depth: usize,
    pub min_leaf_events: usize,
    pub mtry: usize,
}

pub(crate) fn grow<R: Rng>(params: &GrowParams<'_>, rows: Vec<usize>, rng: &mut R) -> SurvivalTree {
    let mut nodes = Vec::new();
    build(params, rows, 0, rng, &mut nodes);
    SurvivalTree { nodes }
}

fn make_leaf(params: &GrowParams<'_>, rows: &[usize]) -> SurvivalNode {
    let leaf_targets: Vec<SurvivalTarget> = rows.iter().map(|&r| params.targets[r]).collect();
    let hazard = nelson_aalen(&leaf_targets);
    let score = hazard.sum_over_sorted(params.event_times);
    SurvivalNode::Leaf { hazard, score }
}

fn find_split<R: Rng>(params: &GrowParams<'_>, rows: &[usize], rng: &mut R) -> Option<SplitCandidate> {
    let times = NodeTimes::new(rows, params.targets);
    if times.total_events < 2 * params.min_leaf_events.max(1) {
        return None;
    }
    let p = params.features.n_cols();
    let mut columns = index::sample(rng, p, params.mtry.min(p)).into_vec();
    columns.sort_unstable();
    let mut values = vec![0.0; rows.len()];
    let mut best: Option<SplitCandidate> = None;
    for col in columns {
        for (v, &r) in values.iter_mut().zip(rows) {
            *v = params.features.get(r, col);
        }
        if let Some(c) = best_split_for_column(rows, &values, params.targets, &times, col, params.min_leaf_events) {
            if improves(c.score, best.map(|b| b.score)) {
                best = Some(c);
            }
        }
    }
    best
}

fn build<R: Rng>(
    params: &GrowParams<'_>,
    rows: Vec<usize>,
    depth: usize,
    rng: &mut R,
    nodes: &mut Vec<SurvivalNode>,
) -> usize {
    let id = nodes.len();
    let split = if depth < params.max_depth { find_split(params, &rows, rng) } else { None };
    let Some(split) = split else {
        nodes.push(make_leaf(params, &rows));
        return id;
    };
    nodes.push(SurvivalNode::Split { column: split.column, threshold: split.threshold, left: 0, right: 0 });
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&r| params.features.get(r, split.column) <= split.threshold);
    let left = build(params, left_rows, depth + 1, rng, nodes);
    let right = build(params, right_rows, depth + 1, rng, nodes);
    if let SurvivalNode::Split { left: l, right: r, .. } = &mut nodes[id] {
        *l = left;
        *r = right;
    }
    id
}
