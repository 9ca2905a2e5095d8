use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hla::HlaProfile;
use crate::survival::SurvivalTarget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "M" | "MALE" => Ok(Sex::Male),
            "F" | "FEMALE" => Ok(Sex::Female),
            other => Err(Error::Parse(format!("unknown sex `{other}`"))),
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::Male => "M",
            Sex::Female => "F",
        })
    }
}

/// Fixed race ontology used for one-hot encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Race {
    White,
    Black,
    Hispanic,
    Asian,
    Other,
}

impl Race {
    pub const ALL: [Race; 5] = [Race::White, Race::Black, Race::Hispanic, Race::Asian, Race::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Race::White => "white",
            Race::Black => "black",
            Race::Hispanic => "hispanic",
            Race::Asian => "asian",
            Race::Other => "other",
        }
    }
}

impl FromStr for Race {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Race::ALL
            .into_iter()
            .find(|r| r.as_str() == lower)
            .ok_or_else(|| Error::Parse(format!("unknown race `{s}`")))
    }
}

impl fmt::Display for Race {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pre-transplant covariates of one party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Person {
    /// Years.
    pub age: f64,
    pub sex: Sex,
    pub race: Race,
    /// kg/m².
    pub bmi: f64,
}

/// Covariates available at or after the transplant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostTransplant {
    /// mg/dL.
    pub donor_creatinine: f64,
    pub recipient_creatinine_tx: f64,
    pub recipient_creatinine_discharge: f64,
    pub dialysis_first_week: bool,
    /// Hours; may be missing and is then mean-imputed by the encoder.
    pub cold_ischemia_time: Option<f64>,
}

/// Registry fields used only by the inclusion filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistryInfo {
    pub tx_year: i32,
    pub peak_pra: f64,
    pub deceased_donor: bool,
    pub prior_transplants: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransplantRecord {
    pub id: String,
    pub donor_hla: HlaProfile,
    pub recipient_hla: HlaProfile,
    pub donor: Person,
    pub recipient: Person,
    pub post: Option<PostTransplant>,
    pub registry: Option<RegistryInfo>,
    pub target: SurvivalTarget,
}
