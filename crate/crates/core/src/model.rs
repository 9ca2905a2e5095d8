//! Fitted models of every family and their on-disk artifact.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coxnet::{fit_coxnet, CoxnetConfig, CoxnetModel};
use crate::ensemble::{fit_gb, fit_rsf, EnsembleModel, GbConfig, RsfConfig};
use crate::error::{Error, Result};
use crate::features::{EncoderPlan, FeatureMatrix};
use crate::survival::{StepFunction, SurvivalDataset};

pub const ARTIFACT_FORMAT: &str = "graftsurv-model";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    Coxnet,
    Rsf,
    GradientBoost,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Coxnet, ModelKind::Rsf, ModelKind::GradientBoost];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Coxnet => "coxnet",
            ModelKind::Rsf => "rsf",
            ModelKind::GradientBoost => "gb",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coxnet" | "cox" => Ok(ModelKind::Coxnet),
            "rsf" => Ok(ModelKind::Rsf),
            "gb" | "gbm" | "gradient_boost" => Ok(ModelKind::GradientBoost),
            other => Err(Error::InvalidInput(format!("unknown model `{other}` (expected coxnet, rsf or gb)"))),
        }
    }
}

/// One hyperparameter configuration of any model family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelConfig {
    Coxnet(CoxnetConfig),
    Rsf(RsfConfig),
    GradientBoost(GbConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Coxnet(_) => ModelKind::Coxnet,
            ModelConfig::Rsf(_) => ModelKind::Rsf,
            ModelConfig::GradientBoost(_) => ModelKind::GradientBoost,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ModelConfig::Coxnet(c) => c.describe(),
            ModelConfig::Rsf(c) => c.describe(),
            ModelConfig::GradientBoost(c) => c.describe(),
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            ModelConfig::Rsf(c) => ModelConfig::Rsf(RsfConfig { seed, ..c }),
            ModelConfig::GradientBoost(c) => ModelConfig::GradientBoost(GbConfig { seed, ..c }),
            other => other,
        }
    }

    pub fn fit(&self, data: &SurvivalDataset) -> Result<FittedModel> {
        Ok(match self {
            ModelConfig::Coxnet(c) => FittedModel::Coxnet(fit_coxnet(data, c)?),
            ModelConfig::Rsf(c) => FittedModel::Ensemble(EnsembleModel::Rsf(fit_rsf(data, c)?)),
            ModelConfig::GradientBoost(c) => FittedModel::Ensemble(EnsembleModel::GradientBoost(fit_gb(data, c)?)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedModel {
    Coxnet(CoxnetModel),
    Ensemble(EnsembleModel),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Coxnet(_) => ModelKind::Coxnet,
            FittedModel::Ensemble(EnsembleModel::Rsf(_)) => ModelKind::Rsf,
            FittedModel::Ensemble(EnsembleModel::GradientBoost(_)) => ModelKind::GradientBoost,
        }
    }

    /// Larger means higher predicted risk.
    pub fn predict_risk(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            FittedModel::Coxnet(m) => m.predict_risk(features),
            FittedModel::Ensemble(m) => m.predict_risk(features),
        }
    }

    pub fn column_names(&self) -> &[String] {
        match self {
            FittedModel::Coxnet(m) => &m.column_names,
            FittedModel::Ensemble(m) => m.column_names(),
        }
    }
}

/// Everything needed to score new records: the encoder, the model and the
/// training censoring distribution used for IPCW metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub version: u32,
    pub encoder: Option<EncoderPlan>,
    pub censoring: Option<StepFunction>,
    pub model: FittedModel,
}

impl ModelArtifact {
    pub fn new(model: FittedModel, encoder: Option<EncoderPlan>, censoring: Option<StepFunction>) -> Self {
        ModelArtifact { format: ARTIFACT_FORMAT.to_string(), version: ARTIFACT_VERSION, encoder, censoring, model }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let format = value.get("format").and_then(|v| v.as_str());
        if format != Some(ARTIFACT_FORMAT) {
            return Err(Error::Parse(format!("not a {ARTIFACT_FORMAT} artifact (format = {format:?})")));
        }
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(ARTIFACT_VERSION as u64) {
            return Err(Error::Parse(format!(
                "unsupported artifact version {version:?} (this build reads version {ARTIFACT_VERSION})"
            )));
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::pipeline::write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
