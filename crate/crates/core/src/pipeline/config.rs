//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys mirror the
//! fields of [`SynthConfig`], [`ExperimentConfig`] and [`IngestConfig`];
//! list values are comma separated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::hla::Locus;
use crate::model::ModelKind;

use super::experiment::ExperimentConfig;
use super::ingest::IngestConfig;
use super::synth::{SynthConfig, EFFECT_KEYS};

pub const SYNTH_KEYS: [&str; 6] = ["n_records", "seed", "mm_log_hazard", "baseline_shape", "baseline_scale", "censor_rate"];

pub const EXPERIMENT_KEYS: [&str; 20] = [
    "feature_sets",
    "models",
    "baseline",
    "n_splits",
    "master_seed",
    "include_post",
    "strict",
    "refit_encoder",
    "audit",
    "frequent_pair_threshold",
    "coxnet_lambda_count",
    "coxnet_r_count",
    "coxnet_max_iter",
    "rsf_trees",
    "rsf_depths",
    "min_leaf_events",
    "gb_trees",
    "gb_depths",
    "gb_learning_rate",
    "gb_subsample",
];

pub const INGEST_KEYS: [&str; 7] = [
    "broadsplit_path",
    "year_min",
    "year_max",
    "min_recipient_age",
    "max_peak_pra",
    "deceased_only",
    "first_transplant_only",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    values: BTreeMap<String, String>,
}

fn is_known(key: &str) -> bool {
    SYNTH_KEYS.contains(&key)
        || EXPERIMENT_KEYS.contains(&key)
        || INGEST_KEYS.contains(&key)
        || key.strip_prefix("effect.").is_some_and(|k| EFFECT_KEYS.contains(&k))
        || key.strip_prefix("freq.").is_some_and(|k| k.parse::<crate::hla::HlaAntigen>().is_ok())
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value", i + 1)))?;
            let key = k.trim().to_string();
            if !is_known(&key) {
                return Err(Error::Parse(format!("config line {}: unknown key `{key}`", i + 1)));
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Parse(format!("config line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(KeyValues { values })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.values.get(key).map(|v| v.to_ascii_lowercase()) {
            None => Ok(None),
            Some(v) => match v.as_str() {
                "true" | "1" | "yes" => Ok(Some(true)),
                "false" | "0" | "no" => Ok(Some(false)),
                _ => Err(Error::Parse(format!("config key `{key}`: `{v}` is not a boolean"))),
            },
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| Error::Parse(format!("config key `{key}`: cannot parse `{s}`"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn apply_synth(&self, cfg: &mut SynthConfig) -> Result<()> {
        if let Some(v) = self.get("n_records")? {
            cfg.n_records = v;
        }
        if let Some(v) = self.get("seed")? {
            cfg.seed = v;
        }
        if let Some(v) = self.get("mm_log_hazard")? {
            cfg.mm_log_hazard = v;
        }
        if let Some(v) = self.get("baseline_shape")? {
            cfg.baseline_shape = v;
        }
        if let Some(v) = self.get("baseline_scale")? {
            cfg.baseline_scale = v;
        }
        if let Some(v) = self.get("censor_rate")? {
            cfg.censor_rate = v;
        }
        let mut freq: BTreeMap<Locus, Vec<(crate::hla::HlaAntigen, f64)>> = BTreeMap::new();
        for k in self.values.keys() {
            if let Some(name) = k.strip_prefix("effect.") {
                let x = self.get(k)?.expect("key present");
                cfg.covariate_effect_sizes.insert(name.to_string(), x);
            } else if let Some(name) = k.strip_prefix("freq.") {
                let antigen: crate::hla::HlaAntigen = name.parse()?;
                let x: f64 = self.get(k)?.expect("key present");
                freq.entry(antigen.locus).or_default().push((antigen, x));
            }
        }
        // a locus listed in the file replaces the default table for that locus
        for (locus, entries) in freq {
            cfg.antigen_freq_table.insert(locus, entries);
        }
        cfg.validate()
    }

    pub fn apply_experiment(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(v) = self.get_list::<FeatureSet>("feature_sets")? {
            cfg.feature_sets = v;
        }
        if let Some(v) = self.get_list::<ModelKind>("models")? {
            cfg.models = v;
        }
        if let Some(v) = self.get_raw("baseline") {
            cfg.baseline = match v.trim() {
                "" | "none" => None,
                name => Some(name.parse()?),
            };
        }
        macro_rules! set {
            ($key:literal, $field:ident) => {
                if let Some(v) = self.get($key)? {
                    cfg.$field = v;
                }
            };
        }
        set!("n_splits", n_splits);
        set!("master_seed", master_seed);
        set!("frequent_pair_threshold", frequent_pair_threshold);
        set!("coxnet_lambda_count", coxnet_lambda_count);
        set!("coxnet_r_count", coxnet_r_count);
        set!("coxnet_max_iter", coxnet_max_iter);
        set!("rsf_trees", rsf_trees);
        set!("min_leaf_events", min_leaf_events);
        set!("gb_trees", gb_trees);
        set!("gb_learning_rate", gb_learning_rate);
        set!("gb_subsample", gb_subsample);
        for (key, field) in [
            ("include_post", &mut cfg.include_post),
            ("strict", &mut cfg.strict),
            ("refit_encoder", &mut cfg.refit_encoder),
            ("audit", &mut cfg.audit),
        ] {
            if let Some(v) = self.get_bool(key)? {
                *field = v;
            }
        }
        if let Some(v) = self.get_list("rsf_depths")? {
            cfg.rsf_depths = v;
        }
        if let Some(v) = self.get_list("gb_depths")? {
            cfg.gb_depths = v;
        }
        Ok(())
    }

    pub fn apply_ingest(&self, cfg: &mut IngestConfig) -> Result<()> {
        if let Some(v) = self.get_raw("broadsplit_path") {
            cfg.broadsplit_path = Some(PathBuf::from(v));
        }
        if let Some(v) = self.get("year_min")? {
            cfg.year_min = v;
        }
        if let Some(v) = self.get("year_max")? {
            cfg.year_max = v;
        }
        if let Some(v) = self.get("min_recipient_age")? {
            cfg.min_recipient_age = v;
        }
        if let Some(v) = self.get("max_peak_pra")? {
            cfg.max_peak_pra = v;
        }
        if let Some(v) = self.get_bool("deceased_only")? {
            cfg.deceased_only = v;
        }
        if let Some(v) = self.get_bool("first_transplant_only")? {
            cfg.first_transplant_only = v;
        }
        cfg.validate()
    }
}
