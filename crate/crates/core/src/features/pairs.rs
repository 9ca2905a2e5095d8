//! Donor/recipient HLA pair encoding restricted to biologically active pairs.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hla::{expand, expand_locus, is_matched, BroadSplitTable, HlaAntigen, HlaProfile, Locus};

/// Ordered (donor antigen, recipient antigen) pair at one locus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HlaPair {
    pub donor: HlaAntigen,
    pub recipient: HlaAntigen,
}

impl fmt::Display for HlaPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.donor, self.recipient)
    }
}

impl HlaPair {
    pub fn column_name(&self) -> String {
        format!("pair_{}_{}", self.donor, self.recipient)
    }
}

/// Active pairs of a transplant.
///
/// Candidates are typed donor antigens crossed with typed recipient antigens
/// at the same locus. A matched donor antigen keeps only the pairs whose
/// recipient antigen lies in its own expansion; a mismatched donor antigen
/// keeps every pair.
pub fn active_pairs(donor: &HlaProfile, recipient: &HlaProfile, table: &BroadSplitTable) -> BTreeSet<HlaPair> {
    let mut out = BTreeSet::new();
    for locus in Locus::ALL {
        let recipient_typed = recipient.typed(locus);
        let recipient_expanded = expand_locus(recipient, table, locus);
        for d in donor.typed(locus) {
            if is_matched(d, &recipient_expanded, table) {
                let own = expand(d, table);
                for &r in recipient_typed.iter().filter(|r| own.contains(r)) {
                    out.insert(HlaPair { donor: d, recipient: r });
                }
            } else {
                for &r in &recipient_typed {
                    out.insert(HlaPair { donor: d, recipient: r });
                }
            }
        }
    }
    out
}
