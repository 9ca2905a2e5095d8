//! Target encoding of HLA types.
//!
//! One map is shared by all loci and by donor and recipient: an antigen's
//! statistic pools every training transplant in which either party is typed
//! with it. Occurrences are counted at the typed level, without broad
//! expansion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hla::{HlaAntigen, Locus};
use crate::record::TransplantRecord;
use crate::survival::{SurvivalTarget, DAYS_PER_YEAR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TargetMode {
    /// Mean observed time (event or censoring time) of carriers.
    Regression,
    /// Failure fraction at the given horizon in years among decidable carriers.
    ClassificationYears(f64),
}

impl TargetMode {
    pub fn tag(&self) -> String {
        match self {
            TargetMode::Regression => "reg".to_string(),
            TargetMode::ClassificationYears(t) => format!("cls{t}"),
        }
    }

    /// Binarized target at the horizon, `None` when censored before it.
    fn label(&self, target: &SurvivalTarget) -> Option<f64> {
        match *self {
            TargetMode::Regression => Some(target.time),
            TargetMode::ClassificationYears(years) => {
                let horizon = years * DAYS_PER_YEAR;
                if target.event && target.time <= horizon {
                    Some(1.0)
                } else if target.time >= horizon {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }
}

impl fmt::Display for TargetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEncodingMap {
    pub mode: TargetMode,
    pub values: BTreeMap<HlaAntigen, f64>,
    /// Mean label over all usable training rows; used for unseen antigens.
    pub fallback: f64,
    /// Training rows dropped as undecidable at the horizon.
    pub excluded_rows: usize,
}

impl TargetEncodingMap {
    pub fn value(&self, antigen: HlaAntigen) -> f64 {
        self.values.get(&antigen).copied().unwrap_or(self.fallback)
    }

    /// Mean of the two slot encodings at a locus, therefore slot-order invariant.
    pub fn locus_value(&self, slots: [HlaAntigen; 2]) -> f64 {
        0.5 * (self.value(slots[0]) + self.value(slots[1]))
    }
}

pub fn fit_target_encoding(records: &[TransplantRecord], mode: TargetMode) -> Result<TargetEncodingMap> {
    if records.is_empty() {
        return Err(Error::InvalidInput("target encoding needs at least one training row".into()));
    }
    if let TargetMode::ClassificationYears(t) = mode {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidInput(format!("classification horizon must be positive, got {t}")));
        }
    }
    let mut sums: BTreeMap<HlaAntigen, (f64, usize)> = BTreeMap::new();
    let mut total = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for rec in records {
        let Some(label) = mode.label(&rec.target) else {
            excluded += 1;
            continue;
        };
        total += label;
        used += 1;
        let carried: BTreeSet<HlaAntigen> = rec.donor_hla.antigens().chain(rec.recipient_hla.antigens()).collect();
        for antigen in carried {
            let e = sums.entry(antigen).or_insert((0.0, 0));
            e.0 += label;
            e.1 += 1;
        }
    }
    if used == 0 {
        return Err(Error::InvalidInput(format!(
            "no training rows are decidable for target encoding mode {mode}"
        )));
    }
    if excluded > 0 {
        log::info!("target encoding {mode}: excluded {excluded} of {} training rows censored before the horizon", records.len());
    }
    Ok(TargetEncodingMap {
        mode,
        values: sums.into_iter().map(|(a, (s, n))| (a, s / n as f64)).collect(),
        fallback: total / used as f64,
        excluded_rows: excluded,
    })
}

/// Six features: donor A, B, DR then recipient A, B, DR.
pub fn encode_types_target(record: &TransplantRecord, map: &TargetEncodingMap) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (i, locus) in Locus::ALL.iter().enumerate() {
        out[i] = map.locus_value(record.donor_hla.locus(*locus));
        out[3 + i] = map.locus_value(record.recipient_hla.locus(*locus));
    }
    out
}

pub(crate) fn column_names() -> Vec<String> {
    ["don", "rec"]
        .iter()
        .flat_map(|side| Locus::ALL.iter().map(move |l| format!("te_{side}_{l}")))
        .collect()
}
