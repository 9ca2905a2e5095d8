//! Repeated split / tune / refit / test protocol.

use rayon::prelude::*;

use crate::coxnet::{coxnet_grid, CoxnetConfig};
use crate::ensemble::{GbConfig, RsfConfig, GB_DEPTHS, RSF_DEPTHS};
use crate::error::{Error, Result};
use crate::eval::{bonferroni, c_index, mean_dynamic_auc, paired_t, wilcoxon_signed_rank, Alternative, TestResult};
use crate::features::{encode_dataset, fit_encoder, EncoderRequest, FeatureSet, TargetMode, FREQUENT_PAIR_THRESHOLD};
use crate::hla::BroadSplitTable;
use crate::model::{ModelConfig, ModelKind};
use crate::record::TransplantRecord;
use crate::survival::{censoring_survival, make_splits, SplitPlan, SurvivalTarget};

use super::report::{DetailRow, ExperimentReport, SummaryRow};

/// Horizons (years) of the classification-mode target encodings compared
/// against the binary type encoding.
pub const TARGET_ENCODING_HORIZONS: [f64; 5] = [1.0, 5.0, 10.0, 15.0, 20.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub feature_sets: Vec<FeatureSet>,
    pub models: Vec<ModelKind>,
    /// Reference set for the significance tests; `None` skips them.
    pub baseline: Option<FeatureSet>,
    pub n_splits: usize,
    pub master_seed: u64,
    pub include_post: bool,
    /// Abort on the first failing cell instead of recording it as missing.
    pub strict: bool,
    /// Refit the encoder on train + validation before the final fit.
    pub refit_encoder: bool,
    /// Check index-set disjointness before every cell.
    pub audit: bool,
    pub frequent_pair_threshold: usize,
    pub coxnet_lambda_count: usize,
    pub coxnet_r_count: usize,
    pub coxnet_max_iter: usize,
    pub rsf_trees: usize,
    pub rsf_depths: Vec<usize>,
    pub min_leaf_events: usize,
    pub gb_trees: usize,
    pub gb_depths: Vec<usize>,
    pub gb_learning_rate: f64,
    pub gb_subsample: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let rsf = RsfConfig::default();
        let gb = GbConfig::default();
        ExperimentConfig {
            feature_sets: FeatureSet::MAIN.to_vec(),
            models: ModelKind::ALL.to_vec(),
            baseline: Some(FeatureSet::Basic),
            n_splits: 10,
            master_seed: 0,
            include_post: false,
            strict: true,
            refit_encoder: true,
            audit: false,
            frequent_pair_threshold: FREQUENT_PAIR_THRESHOLD,
            coxnet_lambda_count: 10,
            coxnet_r_count: 10,
            coxnet_max_iter: CoxnetConfig::default().max_iter,
            rsf_trees: rsf.n_trees,
            rsf_depths: RSF_DEPTHS.to_vec(),
            min_leaf_events: rsf.min_leaf_events,
            gb_trees: gb.n_trees,
            gb_depths: GB_DEPTHS.to_vec(),
            gb_learning_rate: gb.learning_rate,
            gb_subsample: gb.subsample,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_sets.is_empty() || self.models.is_empty() {
            return Err(Error::InvalidInput("need at least one feature set and one model".into()));
        }
        let names: Vec<String> = self.feature_sets.iter().map(|f| f.name()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidInput(format!("feature set `{n}` listed twice")));
            }
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].contains(m) {
                return Err(Error::InvalidInput(format!("model `{m}` listed twice")));
            }
        }
        if let Some(b) = self.baseline {
            if !self.feature_sets.contains(&b) {
                return Err(Error::InvalidInput(format!(
                    "baseline feature set `{}` is not among the feature sets",
                    b.name()
                )));
            }
        }
        if self.n_splits == 0 {
            return Err(Error::InvalidInput("n_splits must be positive".into()));
        }
        for cfg in self.models.iter().flat_map(|m| self.grid(*m)) {
            match cfg {
                ModelConfig::Coxnet(c) => c.validate()?,
                ModelConfig::Rsf(c) => c.validate()?,
                ModelConfig::GradientBoost(c) => c.validate()?,
            }
        }
        if self.models.iter().any(|m| self.grid(*m).is_empty()) {
            return Err(Error::InvalidInput("every model needs a non-empty hyperparameter grid".into()));
        }
        Ok(())
    }

    /// Hyperparameter grid of a model family in declaration order.
    pub fn grid(&self, kind: ModelKind) -> Vec<ModelConfig> {
        match kind {
            ModelKind::Coxnet => coxnet_grid(self.coxnet_lambda_count, self.coxnet_r_count)
                .into_iter()
                .map(|c| ModelConfig::Coxnet(CoxnetConfig { max_iter: self.coxnet_max_iter, ..c }))
                .collect(),
            ModelKind::Rsf => self
                .rsf_depths
                .iter()
                .map(|&max_depth| {
                    ModelConfig::Rsf(RsfConfig {
                        n_trees: self.rsf_trees,
                        max_depth,
                        min_leaf_events: self.min_leaf_events,
                        ..RsfConfig::default()
                    })
                })
                .collect(),
            ModelKind::GradientBoost => self
                .gb_depths
                .iter()
                .map(|&max_depth| {
                    ModelConfig::GradientBoost(GbConfig {
                        n_trees: self.gb_trees,
                        max_depth,
                        learning_rate: self.gb_learning_rate,
                        subsample: self.gb_subsample,
                        ..GbConfig::default()
                    })
                })
                .collect(),
        }
    }

    /// Number of comparisons a Bonferroni correction multiplies by.
    pub fn correction_factor(&self) -> usize {
        match self.baseline {
            Some(b) => self.feature_sets.iter().filter(|f| **f != b).count(),
            None => 0,
        }
    }
}

struct CellOutcome {
    hyperparams: String,
    validation_c_index: f64,
    test_c_index: f64,
    test_mean_auc: f64,
}

fn gather(records: &[TransplantRecord], idx: &[usize]) -> Vec<TransplantRecord> {
    idx.iter().map(|&i| records[i].clone()).collect()
}

fn audit_plan(plan: &SplitPlan, n: usize) -> Result<()> {
    let mut role = vec![0u8; n];
    for (tag, idx) in [(1u8, &plan.train_idx), (2, &plan.valid_idx), (3, &plan.test_idx)] {
        for &i in idx {
            if i >= n || role[i] != 0 {
                return Err(Error::InvalidInput(format!("split {}: row {i} is out of range or reused", plan.seed)));
            }
            role[i] = tag;
        }
    }
    Ok(())
}

fn targets_of(records: &[TransplantRecord]) -> Vec<SurvivalTarget> {
    records.iter().map(|r| r.target).collect()
}

fn run_cell(
    records: &[TransplantRecord],
    plan: &SplitPlan,
    feature_set: FeatureSet,
    kind: ModelKind,
    config: &ExperimentConfig,
    table: &BroadSplitTable,
) -> Result<CellOutcome> {
    if config.audit {
        audit_plan(plan, records.len())?;
    }
    let request = EncoderRequest {
        feature_set,
        include_post_transplant: config.include_post,
        frequent_pair_threshold: config.frequent_pair_threshold,
    };
    let train = gather(records, &plan.train_idx);
    let valid = gather(records, &plan.valid_idx);
    let encoder = fit_encoder(&train, request, table)?;
    let train_data = encode_dataset(&train, &encoder, table)?;
    let valid_data = encode_dataset(&valid, &encoder, table)?;

    let mut best: Option<(ModelConfig, f64)> = None;
    for cfg in config.grid(kind) {
        let cfg = cfg.with_seed(plan.seed);
        let scored = cfg
            .fit(&train_data)
            .and_then(|m| m.predict_risk(&valid_data.features))
            .and_then(|risk| c_index(&risk, &valid_data.targets));
        match scored {
            Ok(metric) => {
                if best.as_ref().is_none_or(|(_, c)| metric.value > *c) {
                    best = Some((cfg, metric.value));
                }
            }
            Err(e) if !config.strict && e.is_numerical() => {
                log::warn!("skipping grid point {}: {e}", cfg.describe());
            }
            Err(e) => return Err(e.at(format!("grid point {}", cfg.describe()))),
        }
    }
    let (chosen, validation_c_index) =
        best.ok_or_else(|| Error::Degenerate("every grid point failed".into()))?;

    let train_valid = gather(records, &plan.train_valid_idx());
    let test = gather(records, &plan.test_idx);
    let final_encoder = if config.refit_encoder { fit_encoder(&train_valid, request, table)? } else { encoder };
    let fit_data = encode_dataset(&train_valid, &final_encoder, table)?;
    let test_data = encode_dataset(&test, &final_encoder, table)?;
    let model = chosen.fit(&fit_data)?;
    let risk = model.predict_risk(&test_data.features)?;
    let test_c = c_index(&risk, &test_data.targets)?;
    let censoring = censoring_survival(&targets_of(&train_valid));
    let auc = mean_dynamic_auc(&risk, &test_data.targets, &censoring)?;
    Ok(CellOutcome {
        hyperparams: chosen.describe(),
        validation_c_index,
        test_c_index: test_c.value,
        test_mean_auc: auc.value,
    })
}

fn one_sided(diffs: &[f64], wilcoxon: bool) -> Option<TestResult> {
    let result = if wilcoxon {
        wilcoxon_signed_rank(diffs, Alternative::Greater)
    } else {
        paired_t(diffs, Alternative::Greater)
    };
    match result {
        Ok(r) => Some(r),
        // identical predictions on every split carry no evidence either way
        Err(Error::Degenerate(_)) if diffs.iter().all(|d| *d == 0.0) => Some(TestResult {
            raw_p: 1.0,
            adjusted_p: 1.0,
            statistic: 0.0,
            n_pairs: diffs.len(),
            method: if wilcoxon { crate::eval::TestMethod::WilcoxonSignedRank } else { crate::eval::TestMethod::PairedT },
        }),
        Err(e) => {
            log::warn!("significance test skipped: {e}");
            None
        }
    }
}

fn summarize(config: &ExperimentConfig, rows: &[DetailRow]) -> Vec<SummaryRow> {
    let m = config.correction_factor();
    let lookup = |split: usize, fs: &str, model: ModelKind| {
        rows.iter().find(|r| r.split == split && r.feature_set == fs && r.model == model)
    };
    let mut out = Vec::new();
    for fs in &config.feature_sets {
        let name = fs.name();
        for &model in &config.models {
            let cells: Vec<&DetailRow> = rows.iter().filter(|r| r.feature_set == name && r.model == model).collect();
            let mean = |f: fn(&DetailRow) -> Option<f64>| {
                let v: Vec<f64> = cells.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            let mut row = SummaryRow {
                feature_set: name.clone(),
                model,
                n_splits: cells.iter().filter(|r| r.test_c_index.is_some()).count(),
                mean_c_index: mean(|r| r.test_c_index),
                mean_auc: mean(|r| r.test_mean_auc),
                c_index_p_wilcoxon: None,
                c_index_p_t: None,
                auc_p_wilcoxon: None,
                auc_p_t: None,
            };
            if let Some(base) = config.baseline.filter(|b| b != fs) {
                let base_name = base.name();
                let diffs = |f: fn(&DetailRow) -> Option<f64>| -> Vec<f64> {
                    (0..config.n_splits)
                        .filter_map(|s| {
                            let a = lookup(s, &name, model).and_then(f)?;
                            let b = lookup(s, &base_name, model).and_then(f)?;
                            Some(a - b)
                        })
                        .collect()
                };
                let dc = diffs(|r| r.test_c_index);
                let da = diffs(|r| r.test_mean_auc);
                let adj = |t: Option<TestResult>| t.map(|t| bonferroni(t.raw_p, m));
                if !dc.is_empty() {
                    row.c_index_p_wilcoxon = adj(one_sided(&dc, true));
                    row.c_index_p_t = adj(one_sided(&dc, false));
                }
                if !da.is_empty() {
                    row.auc_p_wilcoxon = adj(one_sided(&da, true));
                    row.auc_p_t = adj(one_sided(&da, false));
                }
            }
            out.push(row);
        }
    }
    out
}

pub fn run_experiment(
    records: &[TransplantRecord],
    config: &ExperimentConfig,
    table: &BroadSplitTable,
) -> Result<ExperimentReport> {
    config.validate()?;
    if records.is_empty() {
        return Err(Error::InvalidInput("experiment needs records".into()));
    }
    let plans = make_splits(records.len(), config.n_splits, config.master_seed)?;
    let mut cells = Vec::new();
    for (s, plan) in plans.iter().enumerate() {
        for &fs in &config.feature_sets {
            for &model in &config.models {
                cells.push((s, plan, fs, model));
            }
        }
    }
    let outcomes: Vec<Result<CellOutcome>> = cells
        .par_iter()
        .map(|&(s, plan, fs, model)| {
            log::info!("split {s}: fitting {model} on {}", fs.name());
            run_cell(records, plan, fs, model, config, table)
                .map_err(|e| e.at(format!("split {s}, feature set {}, model {model}", fs.name())))
        })
        .collect();
    let mut rows = Vec::with_capacity(cells.len());
    for ((s, _, fs, model), outcome) in cells.into_iter().zip(outcomes) {
        let row = match outcome {
            Ok(o) => DetailRow {
                split: s,
                feature_set: fs.name(),
                model,
                hyperparams: o.hyperparams,
                validation_c_index: Some(o.validation_c_index),
                test_c_index: Some(o.test_c_index),
                test_mean_auc: Some(o.test_mean_auc),
            },
            Err(e) if !config.strict => {
                log::warn!("recording missing cell: {e}");
                DetailRow {
                    split: s,
                    feature_set: fs.name(),
                    model,
                    hyperparams: String::new(),
                    validation_c_index: None,
                    test_c_index: None,
                    test_mean_auc: None,
                }
            }
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    let summary = summarize(config, &rows);
    Ok(ExperimentReport {
        feature_sets: config.feature_sets.iter().map(|f| f.name()).collect(),
        models: config.models.clone(),
        baseline: config.baseline.map(|b| b.name()),
        correction_factor: config.correction_factor(),
        n_splits: config.n_splits,
        split_plans: plans,
        rows,
        summary,
    })
}

/// Binary type encoding against target encodings in regression mode and in
/// classification mode at each horizon.
pub fn target_encoding_feature_sets() -> Vec<FeatureSet> {
    let mut sets = vec![FeatureSet::TypesBinary, FeatureSet::TypesTarget(TargetMode::Regression)];
    sets.extend(TARGET_ENCODING_HORIZONS.iter().map(|&t| FeatureSet::TypesTarget(TargetMode::ClassificationYears(t))));
    sets
}

pub fn run_target_encoding_comparison(
    records: &[TransplantRecord],
    config: &ExperimentConfig,
    table: &BroadSplitTable,
) -> Result<ExperimentReport> {
    let config = ExperimentConfig {
        feature_sets: target_encoding_feature_sets(),
        baseline: Some(FeatureSet::TypesBinary),
        ..config.clone()
    };
    run_experiment(records, &config, table)
}
