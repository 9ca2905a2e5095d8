//! HLA antigens, the serological broad/split hierarchy and donor to recipient
//! mismatch counting.
//!
//! Antigen codes are category labels. Their numeric order is used only to
//! give vocabularies a deterministic column order.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default broad/split table shipped with the crate.
pub const DEFAULT_BROAD_SPLIT_CSV: &str = include_str!("../data/broad_split.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Locus {
    A,
    B,
    DR,
}

impl Locus {
    pub const ALL: [Locus; 3] = [Locus::A, Locus::B, Locus::DR];

    pub fn index(self) -> usize {
        match self {
            Locus::A => 0,
            Locus::B => 1,
            Locus::DR => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Locus::A => "A",
            Locus::B => "B",
            Locus::DR => "DR",
        }
    }
}

impl fmt::Display for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A serologically typed antigen such as `A23` or `DR5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct HlaAntigen {
    pub locus: Locus,
    pub code: u16,
}

impl HlaAntigen {
    pub fn new(locus: Locus, code: u16) -> Result<Self> {
        if code == 0 {
            return Err(Error::Parse(format!("antigen code must be positive: {locus}0")));
        }
        Ok(HlaAntigen { locus, code })
    }
}

impl fmt::Display for HlaAntigen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.locus, self.code)
    }
}

impl From<HlaAntigen> for String {
    fn from(a: HlaAntigen) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for HlaAntigen {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        parse_antigen(&s)
    }
}

impl FromStr for HlaAntigen {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_antigen(s)
    }
}

/// Parses the textual form `A23`, `B7`, `DR15`. Leading zeros in the code are
/// accepted (`A03` is `A3`).
pub fn parse_antigen(text: &str) -> Result<HlaAntigen> {
    let token = text.trim();
    let split = token
        .find(|c: char| c.is_ascii_digit())
        .ok_or_else(|| Error::Parse(format!("antigen `{token}` has no numeric code")))?;
    let (prefix, digits) = token.split_at(split);
    let locus = match prefix {
        "A" => Locus::A,
        "B" => Locus::B,
        "DR" => Locus::DR,
        "" => return Err(Error::Parse(format!("antigen `{token}` is missing a locus prefix"))),
        other => {
            return Err(Error::Parse(format!(
                "antigen `{token}` has unknown locus `{other}` (expected A, B or DR)"
            )))
        }
    };
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(Error::Parse(format!("antigen `{token}` has a malformed code")));
    }
    let code: u16 = digits
        .parse()
        .map_err(|_| Error::Parse(format!("antigen `{token}` has an out-of-range code")))?;
    if code == 0 {
        return Err(Error::Parse(format!("antigen `{token}` has a zero code")));
    }
    Ok(HlaAntigen { locus, code })
}

/// Split to broad mapping. Depth is one: a broad is never itself a split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadSplitTable {
    entries: HashMap<HlaAntigen, HlaAntigen>,
}

impl BroadSplitTable {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (HlaAntigen, HlaAntigen)>) -> Result<Self> {
        let mut entries = HashMap::new();
        for (split, broad) in pairs {
            if split.locus != broad.locus {
                return Err(Error::InvalidInput(format!(
                    "split {split} and broad {broad} are on different loci"
                )));
            }
            if split == broad {
                return Err(Error::InvalidInput(format!("{split} maps to itself")));
            }
            if let Some(prev) = entries.insert(split, broad) {
                if prev != broad {
                    return Err(Error::InvalidInput(format!(
                        "split {split} maps to both {prev} and {broad}"
                    )));
                }
            }
        }
        for (split, broad) in &entries {
            if entries.contains_key(broad) {
                return Err(Error::InvalidInput(format!(
                    "broad {broad} of {split} is itself listed as a split"
                )));
            }
        }
        Ok(BroadSplitTable { entries })
    }

    /// Reads the `split,broad` CSV format. A header row is required and lines
    /// starting with `#` are comments.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "split" || &headers[1] != "broad" {
            return Err(Error::Parse(format!(
                "broad/split table header must be `split,broad`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut pairs = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::Parse(format!(
                    "broad/split table line {} must have two fields",
                    record.position().map_or(0, |p| p.line())
                )));
            }
            pairs.push((parse_antigen(&record[0])?, parse_antigen(&record[1])?));
        }
        Self::from_pairs(pairs)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn standard() -> Self {
        Self::from_csv_str(DEFAULT_BROAD_SPLIT_CSV).expect("bundled broad/split table is valid")
    }

    pub fn broad_of(&self, antigen: HlaAntigen) -> Option<HlaAntigen> {
        self.entries.get(&antigen).copied()
    }

    pub fn is_split(&self, antigen: HlaAntigen) -> bool {
        self.entries.contains_key(&antigen)
    }

    /// Whether the antigen appears anywhere in the table.
    pub fn knows(&self, antigen: HlaAntigen) -> bool {
        self.entries.contains_key(&antigen) || self.entries.values().any(|b| *b == antigen)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (HlaAntigen, HlaAntigen)> + '_ {
        self.entries.iter().map(|(s, b)| (*s, *b))
    }
}

/// The antigen itself plus its broad when it is a split.
pub fn expand(antigen: HlaAntigen, table: &BroadSplitTable) -> BTreeSet<HlaAntigen> {
    let mut out = BTreeSet::new();
    out.insert(antigen);
    if let Some(broad) = table.broad_of(antigen) {
        out.insert(broad);
    }
    out
}

/// Two antigens per locus; slot order carries no meaning.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HlaProfile {
    slots: [[HlaAntigen; 2]; 3],
}

impl HlaProfile {
    pub fn new(a: [HlaAntigen; 2], b: [HlaAntigen; 2], dr: [HlaAntigen; 2]) -> Result<Self> {
        for (locus, pair) in Locus::ALL.iter().zip([&a, &b, &dr]) {
            for antigen in pair {
                if antigen.locus != *locus {
                    return Err(Error::InvalidInput(format!(
                        "antigen {antigen} placed in a {locus} slot"
                    )));
                }
            }
        }
        Ok(HlaProfile { slots: [a, b, dr] })
    }

    /// Builds a profile from six textual antigens ordered A, A, B, B, DR, DR.
    pub fn parse(slots: [&str; 6]) -> Result<Self> {
        let p = slots.map(parse_antigen);
        let mut it = p.into_iter();
        let mut next = || it.next().expect("six slots");
        let a = [next()?, next()?];
        let b = [next()?, next()?];
        let dr = [next()?, next()?];
        Self::new(a, b, dr)
    }

    pub fn locus(&self, locus: Locus) -> [HlaAntigen; 2] {
        self.slots[locus.index()]
    }

    /// Distinct typed antigens at a locus (one element when homozygous).
    pub fn typed(&self, locus: Locus) -> BTreeSet<HlaAntigen> {
        self.slots[locus.index()].iter().copied().collect()
    }

    pub fn antigens(&self) -> impl Iterator<Item = HlaAntigen> + '_ {
        self.slots.iter().flat_map(|pair| pair.iter().copied())
    }

    pub fn is_homozygous(&self, locus: Locus) -> bool {
        let [x, y] = self.slots[locus.index()];
        x == y
    }
}

/// Per-locus union of [`expand`] over both slots, indexed by [`Locus::index`].
pub fn expand_profile(profile: &HlaProfile, table: &BroadSplitTable) -> [BTreeSet<HlaAntigen>; 3] {
    Locus::ALL.map(|locus| expand_locus(profile, table, locus))
}

pub fn expand_locus(profile: &HlaProfile, table: &BroadSplitTable, locus: Locus) -> BTreeSet<HlaAntigen> {
    profile
        .locus(locus)
        .iter()
        .flat_map(|a| expand(*a, table))
        .collect()
}

/// A donor antigen is matched when its expansion meets the recipient's
/// expanded set at the same locus (split-level or broad-level match).
pub fn is_matched(
    donor_antigen: HlaAntigen,
    recipient_expanded: &BTreeSet<HlaAntigen>,
    table: &BroadSplitTable,
) -> bool {
    expand(donor_antigen, table)
        .iter()
        .any(|a| recipient_expanded.contains(a))
}

/// Number of distinct donor antigens at `locus` that are not matched in the
/// recipient. Recipient-only antigens never count.
pub fn mismatch_count(
    donor: &HlaProfile,
    recipient: &HlaProfile,
    table: &BroadSplitTable,
    locus: Locus,
) -> u8 {
    let recipient_expanded = expand_locus(recipient, table, locus);
    donor
        .typed(locus)
        .into_iter()
        .filter(|d| !is_matched(*d, &recipient_expanded, table))
        .count() as u8
}

pub fn total_mismatch(donor: &HlaProfile, recipient: &HlaProfile, table: &BroadSplitTable) -> u8 {
    Locus::ALL
        .iter()
        .map(|l| mismatch_count(donor, recipient, table, *l))
        .sum()
}
