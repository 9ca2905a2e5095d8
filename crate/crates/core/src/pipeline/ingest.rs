//! Registry CSV ingestion with the cohort inclusion filters.

use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hla::{parse_antigen, HlaAntigen, HlaProfile};
use crate::record::{Person, PostTransplant, Race, RegistryInfo, Sex, TransplantRecord};
use crate::survival::SurvivalTarget;

pub const COLUMNS: [&str; 32] = [
    "id", "don_a1", "don_a2", "don_b1", "don_b2", "don_dr1", "don_dr2", "rec_a1", "rec_a2", "rec_b1", "rec_b2",
    "rec_dr1", "rec_dr2", "don_age", "don_sex", "don_race", "don_bmi", "rec_age", "rec_sex", "rec_race", "rec_bmi",
    "tx_year", "peak_pra", "donor_type", "prior_tx", "don_creat", "rec_creat_tx", "rec_creat_dis", "dialysis_wk1",
    "cit_hours", "graft_days", "event",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub input_path: PathBuf,
    /// `None` uses the bundled table.
    pub broadsplit_path: Option<PathBuf>,
    pub year_min: i32,
    pub year_max: i32,
    pub min_recipient_age: f64,
    /// Rows with peak PRA at or above this percentage are removed.
    pub max_peak_pra: f64,
    pub deceased_only: bool,
    pub first_transplant_only: bool,
    /// When false only the missing-value rule applies (for records that
    /// were already ingested).
    pub apply_filters: bool,
}

impl IngestConfig {
    pub fn new(input_path: impl Into<PathBuf>) -> Self {
        IngestConfig {
            input_path: input_path.into(),
            broadsplit_path: None,
            year_min: 2000,
            year_max: 2016,
            min_recipient_age: 18.0,
            max_peak_pra: 80.0,
            deceased_only: true,
            first_transplant_only: true,
            apply_filters: true,
        }
    }

    /// Reads an already filtered cohort.
    pub fn unfiltered(input_path: impl Into<PathBuf>) -> Self {
        IngestConfig { apply_filters: false, ..IngestConfig::new(input_path) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.year_min > self.year_max {
            return Err(Error::InvalidInput(format!("year_min {} exceeds year_max {}", self.year_min, self.year_max)));
        }
        if !(0.0..=100.0).contains(&self.max_peak_pra) {
            return Err(Error::InvalidInput(format!("max_peak_pra must lie in [0, 100], got {}", self.max_peak_pra)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterRule {
    DeceasedDonor,
    FirstTransplant,
    RecipientAge,
    TransplantYear,
    PeakPra,
    MissingValues,
}

impl FilterRule {
    pub const ORDER: [FilterRule; 6] = [
        FilterRule::DeceasedDonor,
        FilterRule::FirstTransplant,
        FilterRule::RecipientAge,
        FilterRule::TransplantYear,
        FilterRule::PeakPra,
        FilterRule::MissingValues,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FilterRule::DeceasedDonor => "deceased_donor",
            FilterRule::FirstTransplant => "first_transplant",
            FilterRule::RecipientAge => "recipient_age",
            FilterRule::TransplantYear => "transplant_year",
            FilterRule::PeakPra => "peak_pra",
            FilterRule::MissingValues => "missing_values",
        }
    }
}

impl fmt::Display for FilterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttritionLog {
    pub input_rows: usize,
    /// Rows removed by each rule, in application order.
    pub removed: Vec<(FilterRule, usize)>,
    pub retained: usize,
}

impl AttritionLog {
    pub fn total_removed(&self) -> usize {
        self.removed.iter().map(|(_, n)| n).sum()
    }
}

impl fmt::Display for AttritionLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "input rows: {}", self.input_rows)?;
        for (rule, n) in &self.removed {
            writeln!(f, "removed by {rule}: {n}")?;
        }
        write!(f, "retained: {}", self.retained)
    }
}

/// One row with every cell optional.
#[derive(Debug, Default)]
struct RawRow {
    id: String,
    hla: [[Option<HlaAntigen>; 6]; 2],
    don_age: Option<f64>,
    don_sex: Option<Sex>,
    don_race: Option<Race>,
    don_bmi: Option<f64>,
    rec_age: Option<f64>,
    rec_sex: Option<Sex>,
    rec_race: Option<Race>,
    rec_bmi: Option<f64>,
    tx_year: Option<i32>,
    peak_pra: Option<f64>,
    deceased: Option<bool>,
    prior_tx: Option<u32>,
    don_creat: Option<f64>,
    rec_creat_tx: Option<f64>,
    rec_creat_dis: Option<f64>,
    dialysis_wk1: Option<bool>,
    cit_hours: Option<f64>,
    graft_days: Option<f64>,
    event: Option<bool>,
}

fn cell<T>(
    record: &csv::StringRecord,
    idx: usize,
    line: u64,
    parse: impl FnOnce(&str) -> std::result::Result<T, String>,
) -> Result<Option<T>> {
    let text = record.get(idx).unwrap_or("").trim();
    if text.is_empty() {
        return Ok(None);
    }
    parse(text)
        .map(Some)
        .map_err(|e| Error::Parse(format!("line {line}, column {}: {e}", COLUMNS[idx])))
}

fn number(text: &str) -> std::result::Result<f64, String> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{text}` is not a finite number")),
    }
}

fn flag(text: &str) -> std::result::Result<bool, String> {
    match text.to_ascii_lowercase().as_str() {
        "1" | "y" | "yes" | "true" => Ok(true),
        "0" | "n" | "no" | "false" => Ok(false),
        _ => Err(format!("`{text}` is not a 0/1 flag")),
    }
}

fn donor_type(text: &str) -> std::result::Result<bool, String> {
    match text.to_ascii_lowercase().as_str() {
        "deceased" | "d" => Ok(true),
        "living" | "l" => Ok(false),
        _ => Err(format!("`{text}` is not a donor type (deceased or living)")),
    }
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<RawRow> {
    let mut row = RawRow { id: record.get(0).unwrap_or("").trim().to_string(), ..RawRow::default() };
    if row.id.is_empty() {
        return Err(Error::Parse(format!("line {line}: empty id")));
    }
    for side in 0..2 {
        for slot in 0..6 {
            let idx = 1 + side * 6 + slot;
            row.hla[side][slot] = cell(record, idx, line, |t| parse_antigen(t).map_err(|e| e.to_string()))?;
        }
    }
    let sex = |t: &str| t.parse::<Sex>().map_err(|e| e.to_string());
    let race = |t: &str| t.parse::<Race>().map_err(|e| e.to_string());
    row.don_age = cell(record, 13, line, number)?;
    row.don_sex = cell(record, 14, line, sex)?;
    row.don_race = cell(record, 15, line, race)?;
    row.don_bmi = cell(record, 16, line, number)?;
    row.rec_age = cell(record, 17, line, number)?;
    row.rec_sex = cell(record, 18, line, sex)?;
    row.rec_race = cell(record, 19, line, race)?;
    row.rec_bmi = cell(record, 20, line, number)?;
    row.tx_year = cell(record, 21, line, |t| t.parse::<i32>().map_err(|_| format!("`{t}` is not a year")))?;
    row.peak_pra = cell(record, 22, line, number)?;
    row.deceased = cell(record, 23, line, donor_type)?;
    row.prior_tx = cell(record, 24, line, |t| t.parse::<u32>().map_err(|_| format!("`{t}` is not a count")))?;
    row.don_creat = cell(record, 25, line, number)?;
    row.rec_creat_tx = cell(record, 26, line, number)?;
    row.rec_creat_dis = cell(record, 27, line, number)?;
    row.dialysis_wk1 = cell(record, 28, line, flag)?;
    row.cit_hours = cell(record, 29, line, number)?;
    row.graft_days = cell(record, 30, line, number)?;
    row.event = cell(record, 31, line, flag)?;
    Ok(row)
}

fn into_record(row: RawRow) -> Option<TransplantRecord> {
    let profile = |slots: &[Option<HlaAntigen>; 6]| -> Option<HlaProfile> {
        let a: Vec<HlaAntigen> = slots.iter().copied().collect::<Option<_>>()?;
        HlaProfile::new([a[0], a[1]], [a[2], a[3]], [a[4], a[5]]).ok()
    };
    let target = SurvivalTarget::new(row.graft_days?, row.event?).ok()?;
    Some(TransplantRecord {
        id: row.id,
        donor_hla: profile(&row.hla[0])?,
        recipient_hla: profile(&row.hla[1])?,
        donor: Person { age: row.don_age?, sex: row.don_sex?, race: row.don_race?, bmi: row.don_bmi? },
        recipient: Person { age: row.rec_age?, sex: row.rec_sex?, race: row.rec_race?, bmi: row.rec_bmi? },
        post: Some(PostTransplant {
            donor_creatinine: row.don_creat?,
            recipient_creatinine_tx: row.rec_creat_tx?,
            recipient_creatinine_discharge: row.rec_creat_dis?,
            dialysis_first_week: row.dialysis_wk1?,
            cold_ischemia_time: row.cit_hours,
        }),
        registry: Some(RegistryInfo {
            tx_year: row.tx_year?,
            peak_pra: row.peak_pra?,
            deceased_donor: row.deceased?,
            prior_transplants: row.prior_tx?,
        }),
        target,
    })
}

/// Which rule (if any) removes the row. Rules skip rows whose field is
/// missing; those fall through to the missing-value rule.
fn removal_rule(row: &RawRow, config: &IngestConfig) -> Option<FilterRule> {
    if !config.apply_filters {
        return None;
    }
    if config.deceased_only && row.deceased == Some(false) {
        return Some(FilterRule::DeceasedDonor);
    }
    if config.first_transplant_only && row.prior_tx.is_some_and(|p| p > 0) {
        return Some(FilterRule::FirstTransplant);
    }
    if row.rec_age.is_some_and(|a| a < config.min_recipient_age) {
        return Some(FilterRule::RecipientAge);
    }
    if row.tx_year.is_some_and(|y| y < config.year_min || y > config.year_max) {
        return Some(FilterRule::TransplantYear);
    }
    if row.peak_pra.is_some_and(|p| p >= config.max_peak_pra) {
        return Some(FilterRule::PeakPra);
    }
    None
}

/// Parses and filters registry rows from any reader.
pub fn read_records<R: Read>(reader: R, config: &IngestConfig) -> Result<(Vec<TransplantRecord>, AttritionLog)> {
    config.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != COLUMNS {
        return Err(Error::Parse(format!(
            "input header does not match the expected schema; expected `{}`, found `{}`",
            COLUMNS.join(","),
            header.join(",")
        )));
    }
    let mut removed = [0usize; 6];
    let mut kept = Vec::new();
    let mut input_rows = 0;
    for result in rdr.records() {
        let record = result.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse(format!("line {line}: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        input_rows += 1;
        let row = parse_row(&record, line)?;
        if let Some(rule) = removal_rule(&row, config) {
            removed[FilterRule::ORDER.iter().position(|r| *r == rule).unwrap()] += 1;
            continue;
        }
        match into_record(row) {
            Some(rec) => kept.push(rec),
            None => removed[5] += 1,
        }
    }
    let log = AttritionLog {
        input_rows,
        removed: FilterRule::ORDER.iter().copied().zip(removed).collect(),
        retained: kept.len(),
    };
    if kept.is_empty() {
        return Err(Error::InvalidInput(format!("no rows survive the inclusion filters\n{log}")));
    }
    Ok((kept, log))
}

pub fn ingest(config: &IngestConfig) -> Result<(Vec<TransplantRecord>, AttritionLog)> {
    let file = std::fs::File::open(&config.input_path).map_err(|e| {
        Error::InvalidInput(format!("cannot open input {}: {e}", config.input_path.display()))
    })?;
    read_records(std::io::BufReader::new(file), config)
}

/// Writes records in the ingestion schema. Records without registry or
/// post-transplant data get empty cells there.
pub fn write_records<W: Write>(records: &[TransplantRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let mut cells: Vec<String> = vec![r.id.clone()];
        cells.extend(r.donor_hla.antigens().map(|a| a.to_string()));
        cells.extend(r.recipient_hla.antigens().map(|a| a.to_string()));
        for p in [&r.donor, &r.recipient] {
            cells.extend([p.age.to_string(), p.sex.to_string(), p.race.to_string(), p.bmi.to_string()]);
        }
        match &r.registry {
            Some(g) => cells.extend([
                g.tx_year.to_string(),
                g.peak_pra.to_string(),
                if g.deceased_donor { "deceased" } else { "living" }.to_string(),
                g.prior_transplants.to_string(),
            ]),
            None => cells.extend(std::iter::repeat_n(String::new(), 4)),
        }
        match &r.post {
            Some(p) => cells.extend([
                p.donor_creatinine.to_string(),
                p.recipient_creatinine_tx.to_string(),
                p.recipient_creatinine_discharge.to_string(),
                (p.dialysis_first_week as u8).to_string(),
                opt(p.cold_ischemia_time),
            ]),
            None => cells.extend(std::iter::repeat_n(String::new(), 5)),
        }
        cells.push(r.target.time.to_string());
        cells.push((r.target.event as u8).to_string());
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}
