//! Experiment reports and their CSV / markdown renderings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelKind;
use crate::survival::SplitPlan;

use super::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailRow {
    pub split: usize,
    pub feature_set: String,
    pub model: ModelKind,
    /// Chosen grid point; empty for a missing cell.
    pub hyperparams: String,
    pub validation_c_index: Option<f64>,
    pub test_c_index: Option<f64>,
    pub test_mean_auc: Option<f64>,
}

/// Per (feature set, model) means over splits and Bonferroni-adjusted
/// one-sided p-values against the baseline set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub feature_set: String,
    pub model: ModelKind,
    pub n_splits: usize,
    pub mean_c_index: Option<f64>,
    pub mean_auc: Option<f64>,
    pub c_index_p_wilcoxon: Option<f64>,
    pub c_index_p_t: Option<f64>,
    pub auc_p_wilcoxon: Option<f64>,
    pub auc_p_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub feature_sets: Vec<String>,
    pub models: Vec<ModelKind>,
    pub baseline: Option<String>,
    pub correction_factor: usize,
    pub n_splits: usize,
    pub split_plans: Vec<SplitPlan>,
    pub rows: Vec<DetailRow>,
    pub summary: Vec<SummaryRow>,
}

/// Six significant digits, plain decimal notation.
pub fn fmt6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn opt6(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

fn parse_opt(text: &str, what: &str) -> Result<Option<f64>> {
    let t = text.trim();
    if t.is_empty() {
        return Ok(None);
    }
    t.parse::<f64>().map(Some).map_err(|_| Error::Parse(format!("{what}: `{t}` is not a number")))
}

const DETAIL_HEADER: [&str; 7] =
    ["split", "feature_set", "model", "hyperparams", "validation_c_index", "test_c_index", "test_mean_auc"];

/// Metric columns of the wide summary, per model.
const SUMMARY_METRICS: [&str; 2] = ["c_index", "mean_auc"];
const SUMMARY_TESTS: [&str; 2] = ["p_wilcoxon", "p_t"];

impl ExperimentReport {
    pub fn has_comparisons(&self) -> bool {
        self.baseline.is_some() && self.feature_sets.len() > 1
    }

    pub fn summary_for(&self, feature_set: &str, model: ModelKind) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.feature_set == feature_set && r.model == model)
    }

    pub fn detail_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(DETAIL_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.split.to_string(),
                r.feature_set.clone(),
                r.model.to_string(),
                r.hyperparams.clone(),
                opt6(r.validation_c_index),
                opt6(r.test_c_index),
                opt6(r.test_mean_auc),
            ])?;
        }
        finish(w)
    }

    fn summary_header(&self) -> Vec<String> {
        let mut h = vec!["feature_set".to_string()];
        for m in &self.models {
            for metric in SUMMARY_METRICS {
                h.push(format!("{m}_{metric}"));
                if self.has_comparisons() {
                    h.extend(SUMMARY_TESTS.iter().map(|t| format!("{m}_{metric}_{t}")));
                }
            }
        }
        h
    }

    /// Wide table: one row per feature set, metric and p-value columns per model.
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.summary_header())?;
        for fs in &self.feature_sets {
            let mut cells = vec![fs.clone()];
            for &m in &self.models {
                let row = self.summary_for(fs, m);
                let get = |f: fn(&SummaryRow) -> Option<f64>| opt6(row.and_then(f));
                cells.push(get(|r| r.mean_c_index));
                if self.has_comparisons() {
                    cells.push(get(|r| r.c_index_p_wilcoxon));
                    cells.push(get(|r| r.c_index_p_t));
                }
                cells.push(get(|r| r.mean_auc));
                if self.has_comparisons() {
                    cells.push(get(|r| r.auc_p_wilcoxon));
                    cells.push(get(|r| r.auc_p_t));
                }
            }
            w.write_record(&cells)?;
        }
        finish(w)
    }

    pub fn splits_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["split", "seed", "n_train", "n_valid", "n_test"])?;
        for (i, p) in self.split_plans.iter().enumerate() {
            w.write_record([
                i.to_string(),
                p.seed.to_string(),
                p.train_idx.len().to_string(),
                p.valid_idx.len().to_string(),
                p.test_idx.len().to_string(),
            ])?;
        }
        finish(w)
    }

    /// One table per metric with `1 + 2 * models` columns: mean and
    /// Wilcoxon-adjusted p per model.
    pub fn markdown(&self) -> String {
        let mut out = String::new();
        let baseline = self.baseline.as_deref().unwrap_or("none");
        out.push_str(&format!(
            "Mean test metrics over {} splits. p: one-sided Wilcoxon signed-rank vs `{baseline}`, Bonferroni x{}.\n",
            self.n_splits, self.correction_factor
        ));
        let tables: [(&str, fn(&SummaryRow) -> Option<f64>, fn(&SummaryRow) -> Option<f64>); 2] = [
            ("C-index", |r| r.mean_c_index, |r| r.c_index_p_wilcoxon),
            ("Mean AUC", |r| r.mean_auc, |r| r.auc_p_wilcoxon),
        ];
        for (title, value, p) in tables {
            out.push_str(&format!("\n### {title}\n\n| Feature set |"));
            for m in &self.models {
                out.push_str(&format!(" {m} | {m} p |"));
            }
            out.push_str("\n|---|");
            out.push_str(&"---|---|".repeat(self.models.len()));
            out.push('\n');
            for fs in &self.feature_sets {
                out.push_str(&format!("| {fs} |"));
                for &m in &self.models {
                    let row = self.summary_for(fs, m);
                    let v = row.and_then(value).map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
                    let pv = row.and_then(p).map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
                    out.push_str(&format!(" {v} | {pv} |"));
                }
                out.push('\n');
            }
        }
        out
    }

    /// Writes `detail.csv`, `summary.csv`, `splits.csv` and `summary.md` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("detail.csv"), self.detail_csv()?.as_bytes())?;
        write_atomic(&dir.join("summary.csv"), self.summary_csv()?.as_bytes())?;
        write_atomic(&dir.join("splits.csv"), self.splits_csv()?.as_bytes())?;
        write_atomic(&dir.join("summary.md"), self.markdown().as_bytes())?;
        Ok(())
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_detail_csv(text: &str) -> Result<Vec<DetailRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    if rdr.headers()?.iter().collect::<Vec<_>>() != DETAIL_HEADER {
        return Err(Error::Parse("detail CSV header does not match".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(DetailRow {
            split: rec[0].parse().map_err(|_| Error::Parse(format!("bad split index `{}`", &rec[0])))?,
            feature_set: rec[1].to_string(),
            model: rec[2].parse()?,
            hyperparams: rec[3].to_string(),
            validation_c_index: parse_opt(&rec[4], "validation_c_index")?,
            test_c_index: parse_opt(&rec[5], "test_c_index")?,
            test_mean_auc: parse_opt(&rec[6], "test_mean_auc")?,
        });
    }
    Ok(rows)
}

/// Reads a wide summary back into rows. `n_splits` is not part of the wide
/// layout and comes back as 0.
pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header.first().map(String::as_str) != Some("feature_set") {
        return Err(Error::Parse("summary CSV must start with a feature_set column".into()));
    }
    let mut models: Vec<ModelKind> = Vec::new();
    for h in &header[1..] {
        let m: ModelKind = h.split('_').next().unwrap_or("").parse()?;
        if !models.contains(&m) {
            models.push(m);
        }
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        for &m in &models {
            let get = |suffix: &str| -> Result<Option<f64>> {
                let name = format!("{m}_{suffix}");
                match header.iter().position(|h| *h == name) {
                    Some(i) => parse_opt(&rec[i], &name),
                    None => Ok(None),
                }
            };
            rows.push(SummaryRow {
                feature_set: rec[0].to_string(),
                model: m,
                n_splits: 0,
                mean_c_index: get("c_index")?,
                mean_auc: get("mean_auc")?,
                c_index_p_wilcoxon: get("c_index_p_wilcoxon")?,
                c_index_p_t: get("c_index_p_t")?,
                auc_p_wilcoxon: get("mean_auc_p_wilcoxon")?,
                auc_p_t: get("mean_auc_p_t")?,
            });
        }
    }
    Ok(rows)
}
