//! Feature sets built from transplant records.
//!
//! Every set starts with the basic covariate block (and the post-transplant
//! block when requested). Data-dependent state such as vocabularies,
//! imputation means and target-encoding maps is learned by [`fit_encoder`]
//! from training rows only and is frozen in the returned [`EncoderPlan`].

mod matrix;
pub mod pairs;
pub mod target;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use matrix::FeatureMatrix;
pub use pairs::{active_pairs, HlaPair};
pub use target::{encode_types_target, fit_target_encoding, TargetEncodingMap, TargetMode};

use crate::error::{Error, Result};
use crate::hla::{expand_locus, mismatch_count, total_mismatch, BroadSplitTable, HlaAntigen, Locus};
use crate::record::{Person, Race, Sex, TransplantRecord};
use crate::survival::{SurvivalDataset, SurvivalTarget};

/// Default training-frequency cutoff for the frequent-pairs set.
pub const FREQUENT_PAIR_THRESHOLD: usize = 1000;

pub const BASIC_COLUMNS: usize = 23;
pub const POST_TRANSPLANT_COLUMNS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureSet {
    Basic,
    MmTotal,
    MmAbdr,
    TypesBinary,
    TypesTarget(TargetMode),
    Pairs,
    FreqPairs,
    All,
}

impl FeatureSet {
    /// The seven sets compared against the basic set in the main experiment.
    pub const MAIN: [FeatureSet; 7] = [
        FeatureSet::Basic,
        FeatureSet::MmTotal,
        FeatureSet::MmAbdr,
        FeatureSet::TypesBinary,
        FeatureSet::Pairs,
        FeatureSet::FreqPairs,
        FeatureSet::All,
    ];

    pub fn name(&self) -> String {
        match self {
            FeatureSet::Basic => "basic".into(),
            FeatureSet::MmTotal => "mm_total".into(),
            FeatureSet::MmAbdr => "mm_abdr".into(),
            FeatureSet::TypesBinary => "types_binary".into(),
            FeatureSet::TypesTarget(mode) => format!("types_target_{}", mode.tag()),
            FeatureSet::Pairs => "pairs".into(),
            FeatureSet::FreqPairs => "freq_pairs".into(),
            FeatureSet::All => "all".into(),
        }
    }

    fn uses_types_binary(&self) -> bool {
        matches!(self, FeatureSet::TypesBinary | FeatureSet::All)
    }

    fn uses_pairs(&self) -> bool {
        matches!(self, FeatureSet::Pairs | FeatureSet::FreqPairs | FeatureSet::All)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "basic" => FeatureSet::Basic,
            "mm_total" => FeatureSet::MmTotal,
            "mm_abdr" => FeatureSet::MmAbdr,
            "types_binary" => FeatureSet::TypesBinary,
            "types_target_reg" => FeatureSet::TypesTarget(TargetMode::Regression),
            "pairs" => FeatureSet::Pairs,
            "freq_pairs" => FeatureSet::FreqPairs,
            "all" => FeatureSet::All,
            other => {
                let years = other
                    .strip_prefix("types_target_cls")
                    .and_then(|y| y.parse::<f64>().ok())
                    .filter(|y| y.is_finite() && *y > 0.0)
                    .ok_or_else(|| Error::Parse(format!("unknown feature set `{other}`")))?;
                FeatureSet::TypesTarget(TargetMode::ClassificationYears(years))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderRequest {
    pub feature_set: FeatureSet,
    pub include_post_transplant: bool,
    pub frequent_pair_threshold: usize,
}

impl EncoderRequest {
    pub fn new(feature_set: FeatureSet, include_post_transplant: bool) -> Self {
        EncoderRequest {
            feature_set,
            include_post_transplant,
            frequent_pair_threshold: FREQUENT_PAIR_THRESHOLD,
        }
    }
}

/// Fitted, immutable encoder state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderPlan {
    pub request: EncoderRequest,
    columns: Vec<String>,
    cit_mean: f64,
    donor_types: Vec<HlaAntigen>,
    recipient_types: Vec<HlaAntigen>,
    pairs: Vec<HlaPair>,
    target_map: Option<TargetEncodingMap>,
}

impl EncoderPlan {
    pub fn feature_set(&self) -> FeatureSet {
        self.request.feature_set
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn cit_mean(&self) -> f64 {
        self.cit_mean
    }

    pub fn donor_type_vocabulary(&self) -> &[HlaAntigen] {
        &self.donor_types
    }

    pub fn recipient_type_vocabulary(&self) -> &[HlaAntigen] {
        &self.recipient_types
    }

    pub fn pair_vocabulary(&self) -> &[HlaPair] {
        &self.pairs
    }

    pub fn target_map(&self) -> Option<&TargetEncodingMap> {
        self.target_map.as_ref()
    }

    fn base_columns(&self) -> usize {
        BASIC_COLUMNS + if self.request.include_post_transplant { POST_TRANSPLANT_COLUMNS } else { 0 }
    }
}

pub fn basic_column_names() -> Vec<String> {
    let mut names = Vec::with_capacity(BASIC_COLUMNS);
    for side in ["don", "rec"] {
        names.push(format!("{side}_age"));
        names.push(format!("{side}_sex_male"));
        names.push(format!("{side}_bmi"));
        for race in Race::ALL {
            names.push(format!("{side}_race_{race}"));
        }
    }
    names.extend(
        [
            "age_difference",
            "bmi_difference",
            "sex_match",
            "race_match",
            "don_age_over_50",
            "rec_age_over_60",
            "don_rec_bmi_ratio",
        ]
        .map(String::from),
    );
    names
}

pub fn post_transplant_column_names() -> Vec<String> {
    ["don_creat", "rec_creat_tx", "rec_creat_dis", "dialysis_wk1", "cit_hours", "cit_missing"]
        .map(String::from)
        .to_vec()
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn check_person(record: &TransplantRecord, who: &str, p: &Person) -> Result<()> {
    if !(p.age.is_finite() && p.age >= 0.0) || !(p.bmi.is_finite() && p.bmi > 0.0) {
        return Err(Error::RowRejected {
            id: record.id.clone(),
            reason: format!("{who} age/bmi missing or invalid"),
        });
    }
    Ok(())
}

fn push_basic(record: &TransplantRecord, out: &mut Vec<f64>) -> Result<()> {
    check_person(record, "donor", &record.donor)?;
    check_person(record, "recipient", &record.recipient)?;
    for p in [&record.donor, &record.recipient] {
        out.push(p.age);
        out.push(flag(p.sex == Sex::Male));
        out.push(p.bmi);
        for race in Race::ALL {
            out.push(flag(p.race == race));
        }
    }
    let (d, r) = (&record.donor, &record.recipient);
    out.push(d.age - r.age);
    out.push(d.bmi - r.bmi);
    out.push(flag(d.sex == r.sex));
    out.push(flag(d.race == r.race));
    out.push(flag(d.age > 50.0));
    out.push(flag(r.age > 60.0));
    out.push(d.bmi / r.bmi);
    Ok(())
}

fn push_post(record: &TransplantRecord, cit_mean: f64, out: &mut Vec<f64>) -> Result<()> {
    let post = record.post.as_ref().ok_or_else(|| Error::RowRejected {
        id: record.id.clone(),
        reason: "post-transplant covariates missing".into(),
    })?;
    let values = [post.donor_creatinine, post.recipient_creatinine_tx, post.recipient_creatinine_discharge];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::RowRejected {
            id: record.id.clone(),
            reason: "creatinine value missing".into(),
        });
    }
    out.extend_from_slice(&values);
    out.push(flag(post.dialysis_first_week));
    match post.cold_ischemia_time.filter(|c| c.is_finite()) {
        Some(cit) => {
            out.push(cit);
            out.push(0.0);
        }
        None => {
            out.push(cit_mean);
            out.push(1.0);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmVariant {
    Total,
    Abdr,
}

pub fn encode_mm(record: &TransplantRecord, table: &BroadSplitTable, variant: MmVariant) -> Vec<f64> {
    match variant {
        MmVariant::Total => vec![total_mismatch(&record.donor_hla, &record.recipient_hla, table) as f64],
        MmVariant::Abdr => Locus::ALL
            .iter()
            .map(|l| mismatch_count(&record.donor_hla, &record.recipient_hla, table, *l) as f64)
            .collect(),
    }
}

fn expanded_types(profile: &crate::hla::HlaProfile, table: &BroadSplitTable) -> BTreeSet<HlaAntigen> {
    Locus::ALL.iter().flat_map(|l| expand_locus(profile, table, *l)).collect()
}

/// Binary type block: donor vocabulary columns followed by recipient
/// vocabulary columns, 1 for every antigen in the expanded profile.
pub fn encode_types_binary(record: &TransplantRecord, plan: &EncoderPlan, table: &BroadSplitTable) -> Vec<f64> {
    let donor = expanded_types(&record.donor_hla, table);
    let recipient = expanded_types(&record.recipient_hla, table);
    plan.donor_types
        .iter()
        .map(|a| flag(donor.contains(a)))
        .chain(plan.recipient_types.iter().map(|a| flag(recipient.contains(a))))
        .collect()
}

/// Pair block over the plan's pair vocabulary; out-of-vocabulary pairs are dropped.
pub fn encode_pairs(record: &TransplantRecord, plan: &EncoderPlan, table: &BroadSplitTable) -> Vec<f64> {
    let active = active_pairs(&record.donor_hla, &record.recipient_hla, table);
    plan.pairs.iter().map(|p| flag(active.contains(p))).collect()
}

pub fn fit_encoder(
    records: &[TransplantRecord],
    request: EncoderRequest,
    table: &BroadSplitTable,
) -> Result<EncoderPlan> {
    if records.is_empty() {
        return Err(Error::InvalidInput("cannot fit an encoder on zero training rows".into()));
    }
    let fs = request.feature_set;

    let cit_mean = if request.include_post_transplant {
        let cits: Vec<f64> = records
            .iter()
            .filter_map(|r| r.post.and_then(|p| p.cold_ischemia_time))
            .filter(|c| c.is_finite())
            .collect();
        if cits.is_empty() {
            log::warn!("no observed cold ischemia times in training rows; imputing 0");
            0.0
        } else {
            cits.iter().sum::<f64>() / cits.len() as f64
        }
    } else {
        0.0
    };

    let (mut donor_types, mut recipient_types) = (Vec::new(), Vec::new());
    if fs.uses_types_binary() {
        let mut d = BTreeSet::new();
        let mut r = BTreeSet::new();
        for rec in records {
            d.extend(expanded_types(&rec.donor_hla, table));
            r.extend(expanded_types(&rec.recipient_hla, table));
        }
        donor_types = d.into_iter().collect();
        recipient_types = r.into_iter().collect();
    }

    let mut pairs = Vec::new();
    if fs.uses_pairs() {
        let mut counts: BTreeMap<HlaPair, usize> = BTreeMap::new();
        for rec in records {
            for p in active_pairs(&rec.donor_hla, &rec.recipient_hla, table) {
                *counts.entry(p).or_default() += 1;
            }
        }
        let min_count = if fs == FeatureSet::FreqPairs { request.frequent_pair_threshold.max(1) } else { 1 };
        pairs = counts.into_iter().filter(|(_, c)| *c >= min_count).map(|(p, _)| p).collect();
    }

    let target_map = match fs {
        FeatureSet::TypesTarget(mode) => Some(fit_target_encoding(records, mode)?),
        _ => None,
    };

    let mut columns = basic_column_names();
    if request.include_post_transplant {
        columns.extend(post_transplant_column_names());
    }
    let mm_abdr = || ["mm_a", "mm_b", "mm_dr"].map(String::from);
    match fs {
        FeatureSet::Basic => {}
        FeatureSet::MmTotal => columns.push("mm_total".into()),
        FeatureSet::MmAbdr => columns.extend(mm_abdr()),
        FeatureSet::TypesBinary => {}
        FeatureSet::TypesTarget(_) => columns.extend(target::column_names()),
        FeatureSet::Pairs | FeatureSet::FreqPairs => {}
        FeatureSet::All => {
            columns.push("mm_total".into());
            columns.extend(mm_abdr());
        }
    }
    if fs.uses_types_binary() {
        columns.extend(donor_types.iter().map(|a| format!("don_{a}")));
        columns.extend(recipient_types.iter().map(|a| format!("rec_{a}")));
    }
    if fs.uses_pairs() {
        columns.extend(pairs.iter().map(HlaPair::column_name));
    }

    Ok(EncoderPlan {
        request,
        columns,
        cit_mean,
        donor_types,
        recipient_types,
        pairs,
        target_map,
    })
}

/// One encoded row in the plan's column order.
pub fn assemble(record: &TransplantRecord, plan: &EncoderPlan, table: &BroadSplitTable) -> Result<Vec<f64>> {
    let mut row = Vec::with_capacity(plan.n_columns());
    push_basic(record, &mut row)?;
    if plan.request.include_post_transplant {
        push_post(record, plan.cit_mean, &mut row)?;
    }
    debug_assert_eq!(row.len(), plan.base_columns());
    let fs = plan.feature_set();
    match fs {
        FeatureSet::MmTotal => row.extend(encode_mm(record, table, MmVariant::Total)),
        FeatureSet::MmAbdr => row.extend(encode_mm(record, table, MmVariant::Abdr)),
        FeatureSet::TypesTarget(_) => {
            let map = plan.target_map.as_ref().expect("target plan carries a map");
            row.extend(encode_types_target(record, map));
        }
        FeatureSet::All => {
            row.extend(encode_mm(record, table, MmVariant::Total));
            row.extend(encode_mm(record, table, MmVariant::Abdr));
        }
        _ => {}
    }
    if fs.uses_types_binary() {
        row.extend(encode_types_binary(record, plan, table));
    }
    if fs.uses_pairs() {
        row.extend(encode_pairs(record, plan, table));
    }
    debug_assert_eq!(row.len(), plan.n_columns());
    Ok(row)
}

pub fn encode(records: &[TransplantRecord], plan: &EncoderPlan, table: &BroadSplitTable) -> Result<FeatureMatrix> {
    let mut data = Vec::with_capacity(records.len() * plan.n_columns());
    for rec in records {
        data.extend(assemble(rec, plan, table)?);
    }
    FeatureMatrix::new(plan.columns.clone(), data)
}

/// Encodes records and attaches their survival targets.
pub fn encode_dataset(
    records: &[TransplantRecord],
    plan: &EncoderPlan,
    table: &BroadSplitTable,
) -> Result<SurvivalDataset> {
    let features = encode(records, plan, table)?;
    let targets: Vec<SurvivalTarget> = records.iter().map(|r| r.target).collect();
    let ids = records.iter().map(|r| r.id.clone()).collect();
    SurvivalDataset::new(features, targets, ids)
}
