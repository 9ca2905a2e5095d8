//! Random survival forests and gradient-boosted Cox trees.

mod logrank;
mod regtree;
mod tree;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coxnet::{check_columns, RiskSets};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::survival::{distinct_event_times, SurvivalDataset};

pub use logrank::{best_logrank_split, logrank_statistic, SplitCandidate};
pub use regtree::{RegressionNode, RegressionTree};
pub use tree::{SurvivalNode, SurvivalTree};

pub const DEFAULT_N_TREES: usize = 500;
pub const RSF_DEPTHS: [usize; 3] = [5, 10, 15];
pub const GB_DEPTHS: [usize; 3] = [1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsfConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf_events: usize,
    pub seed: u64,
    /// Grow each tree on a bootstrap sample. Disabling it is a test hook.
    pub bootstrap: bool,
    /// Candidate columns per node; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
}

impl Default for RsfConfig {
    fn default() -> Self {
        RsfConfig { n_trees: DEFAULT_N_TREES, max_depth: 10, min_leaf_events: 3, seed: 0, bootstrap: true, mtry: None }
    }
}

impl RsfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidInput("RSF needs at least one tree".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidInput("RSF max_depth must be at least 1".into()));
        }
        if self.mtry == Some(0) {
            return Err(Error::InvalidInput("mtry must be at least 1".into()));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!("trees={};depth={}", self.n_trees, self.max_depth)
    }

    pub fn mtry_for(&self, p: usize) -> usize {
        self.mtry.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize).clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbConfig {
    pub n_trees: usize,
    pub subsample: f64,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for GbConfig {
    fn default() -> Self {
        GbConfig { n_trees: DEFAULT_N_TREES, subsample: 0.5, max_depth: 3, learning_rate: 0.1, seed: 0 }
    }
}

impl GbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidInput("boosting needs at least one tree".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidInput(format!("subsample must lie in (0, 1], got {}", self.subsample)));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidInput("boosting max_depth must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("learning rate must be non-negative, got {}", self.learning_rate)));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!("trees={};depth={};lr={}", self.n_trees, self.max_depth, self.learning_rate)
    }
}

pub fn rsf_grid() -> Vec<RsfConfig> {
    RSF_DEPTHS.iter().map(|&max_depth| RsfConfig { max_depth, ..RsfConfig::default() }).collect()
}

pub fn gb_grid() -> Vec<GbConfig> {
    GB_DEPTHS.iter().map(|&max_depth| GbConfig { max_depth, ..GbConfig::default() }).collect()
}

fn tree_seed(seed: u64, tree: usize) -> u64 {
    seed ^ (tree as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// `n` row indices drawn uniformly with replacement.
pub fn bootstrap_indices<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsfModel {
    pub config: RsfConfig,
    pub column_names: Vec<String>,
    /// Distinct training event times at which leaf hazards are summed.
    pub event_times: Vec<f64>,
    pub trees: Vec<SurvivalTree>,
}

impl RsfModel {
    /// Sum of the ensemble cumulative hazard over the training event times.
    pub fn predict_risk(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        check_columns(&self.column_names, features)?;
        let k = self.trees.len() as f64;
        Ok(features
            .rows()
            .map(|x| self.trees.iter().map(|t| t.leaf_for(x).1).sum::<f64>() / k)
            .collect())
    }

    /// Ensemble cumulative hazard of every row at time `t`.
    pub fn cumulative_hazard(&self, features: &FeatureMatrix, t: f64) -> Result<Vec<f64>> {
        check_columns(&self.column_names, features)?;
        let k = self.trees.len() as f64;
        Ok(features
            .rows()
            .map(|x| self.trees.iter().map(|tree| tree.leaf_for(x).0.eval(t)).sum::<f64>() / k)
            .collect())
    }
}

pub fn fit_rsf(data: &SurvivalDataset, config: &RsfConfig) -> Result<RsfModel> {
    config.validate()?;
    data.require_events()?;
    let features = &data.features;
    let n = data.n_rows();
    let p = features.n_cols();
    if (0..p).all(|c| {
        let first = features.get(0, c);
        (1..n).all(|r| features.get(r, c) == first)
    }) {
        log::warn!("all {p} feature columns are constant; trees reduce to a single leaf");
    }
    let event_times = distinct_event_times(&data.targets);
    let params = tree::GrowParams {
        features,
        targets: &data.targets,
        event_times: &event_times,
        max_depth: config.max_depth,
        min_leaf_events: config.min_leaf_events,
        mtry: config.mtry_for(p),
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(config.seed, i));
            let rows = if config.bootstrap { bootstrap_indices(n, &mut rng) } else { (0..n).collect() };
            tree::grow(&params, rows, &mut rng)
        })
        .collect();
    Ok(RsfModel { config: *config, column_names: features.column_names().to_vec(), event_times, trees })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbModel {
    pub config: GbConfig,
    pub column_names: Vec<String>,
    pub init_score: f64,
    pub trees: Vec<RegressionTree>,
    /// Negative log partial likelihood on the training rows before the first
    /// stage and after each stage.
    pub train_loss: Vec<f64>,
}

impl GbModel {
    pub fn predict_risk(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        check_columns(&self.column_names, features)?;
        let lr = self.config.learning_rate;
        Ok(features
            .rows()
            .map(|x| self.init_score + lr * self.trees.iter().map(|t| t.predict(x)).sum::<f64>())
            .collect())
    }
}

pub fn fit_gb(data: &SurvivalDataset, config: &GbConfig) -> Result<GbModel> {
    config.validate()?;
    data.require_events()?;
    let features = &data.features;
    let n = data.n_rows();
    let p = features.n_cols();
    let columns: Vec<Vec<f64>> = (0..p).map(|c| features.column(c)).collect();
    let presorted = regtree::Presorted::new(columns);
    let risk_sets = RiskSets::new(&data.targets);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let m = ((config.subsample * n as f64).round() as usize).clamp(1, n);
    let init_score = 0.0;
    let mut scores = vec![init_score; n];
    let mut train_loss = vec![-risk_sets.log_likelihood(&scores)];
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut in_sample = vec![m == n; n];
    for _ in 0..config.n_trees {
        let (gradient, _) = risk_sets.gradient_and_weights(&scores);
        if m < n {
            in_sample.iter_mut().for_each(|s| *s = false);
            for i in index::sample(&mut rng, n, m) {
                in_sample[i] = true;
            }
        }
        let tree = regtree::fit_regression_tree(&presorted, &gradient, &in_sample, config.max_depth);
        for (s, x) in scores.iter_mut().zip(features.rows()) {
            *s += config.learning_rate * tree.predict(x);
        }
        train_loss.push(-risk_sets.log_likelihood(&scores));
        trees.push(tree);
    }
    Ok(GbModel { config: *config, column_names: features.column_names().to_vec(), init_score, trees, train_loss })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleKind {
    Rsf,
    GradientBoost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnsembleModel {
    Rsf(RsfModel),
    GradientBoost(GbModel),
}

impl EnsembleModel {
    pub fn kind(&self) -> EnsembleKind {
        match self {
            EnsembleModel::Rsf(_) => EnsembleKind::Rsf,
            EnsembleModel::GradientBoost(_) => EnsembleKind::GradientBoost,
        }
    }

    pub fn n_trees(&self) -> usize {
        match self {
            EnsembleModel::Rsf(m) => m.trees.len(),
            EnsembleModel::GradientBoost(m) => m.trees.len(),
        }
    }

    pub fn column_names(&self) -> &[String] {
        match self {
            EnsembleModel::Rsf(m) => &m.column_names,
            EnsembleModel::GradientBoost(m) => &m.column_names,
        }
    }

    pub fn predict_risk(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            EnsembleModel::Rsf(m) => m.predict_risk(features),
            EnsembleModel::GradientBoost(m) => m.predict_risk(features),
        }
    }
}
