use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Largest sample size for which the Wilcoxon null distribution is enumerated.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    /// Differences tend to be positive.
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMethod {
    WilcoxonSignedRank,
    PairedT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub raw_p: f64,
    pub adjusted_p: f64,
    pub statistic: f64,
    pub n_pairs: usize,
    pub method: TestMethod,
}

impl TestResult {
    pub fn with_correction(mut self, m: usize) -> Self {
        self.adjusted_p = bonferroni(self.raw_p, m);
        self
    }
}

pub fn bonferroni(raw_p: f64, m: usize) -> f64 {
    (raw_p * m.max(1) as f64).min(1.0)
}

fn check_finite(diffs: &[f64]) -> Result<()> {
    if let Some(i) = diffs.iter().position(|d| !d.is_finite()) {
        return Err(Error::InvalidInput(format!("difference {i} is not finite")));
    }
    Ok(())
}

/// Midranks of `abs_values`, doubled so that they are integers.
fn doubled_midranks(abs_values: &[f64]) -> Vec<u64> {
    let n = abs_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| abs_values[a].total_cmp(&abs_values[b]));
    let mut ranks = vec![0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && abs_values[order[j]] == abs_values[order[i]] {
            j += 1;
        }
        // positions i+1..=j share the rank (i + 1 + j) / 2
        for &k in &order[i..j] {
            ranks[k] = (i + 1 + j) as u64;
        }
        i = j;
    }
    ranks
}

/// Counts of sign assignments by doubled positive-rank sum.
fn exact_null_counts(doubled_ranks: &[u64]) -> Vec<u64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Wilcoxon signed-rank test on paired differences. Zero differences are
/// dropped; ties share midranks. Up to 25 nonzero differences the null
/// distribution is enumerated exactly, beyond that a normal approximation
/// with tie and continuity corrections is used. `statistic` is `W+`.
pub fn wilcoxon_signed_rank(diffs: &[f64], alternative: Alternative) -> Result<TestResult> {
    check_finite(diffs)?;
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::Degenerate("all paired differences are zero".into()));
    }
    let n = nonzero.len();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = doubled_midranks(&abs);
    let w2: u64 = ranks.iter().zip(&nonzero).filter(|(_, &d)| d > 0.0).map(|(r, _)| r).sum();
    let statistic = w2 as f64 / 2.0;
    let raw_p = if n <= WILCOXON_EXACT_MAX_N {
        let counts = exact_null_counts(&ranks);
        let all = 2f64.powi(n as i32);
        let upper = counts[w2 as usize..].iter().sum::<u64>() as f64 / all;
        let lower = counts[..=w2 as usize].iter().sum::<u64>() as f64 / all;
        match alternative {
            Alternative::Greater => upper,
            Alternative::Less => lower,
            Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
        }
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut tie_term = 0.0;
        let mut sorted = abs.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j < n && sorted[j] == sorted[i] {
                j += 1;
            }
            let t = (j - i) as f64;
            tie_term += t * t * t - t;
            i = j;
        }
        let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0).sqrt();
        let normal = Normal::standard();
        let upper = 1.0 - normal.cdf((statistic - mean - 0.5) / sd);
        let lower = normal.cdf((statistic - mean + 0.5) / sd);
        match alternative {
            Alternative::Greater => upper,
            Alternative::Less => lower,
            Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
        }
    };
    let raw_p = raw_p.clamp(0.0, 1.0);
    Ok(TestResult { raw_p, adjusted_p: raw_p, statistic, n_pairs: n, method: TestMethod::WilcoxonSignedRank })
}

/// Paired t-test on the differences with `n - 1` degrees of freedom.
pub fn paired_t(diffs: &[f64], alternative: Alternative) -> Result<TestResult> {
    check_finite(diffs)?;
    let n = diffs.len();
    if n < 2 {
        return Err(Error::InvalidInput("paired t-test needs at least two differences".into()));
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let sd = var.sqrt();
    if !(sd > 1e-12 * scale) {
        return Err(Error::Degenerate("paired differences have zero variance".into()));
    }
    let t = mean / (sd / nf.sqrt());
    let dist = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let raw_p = match alternative {
        Alternative::Greater => dist.sf(t),
        Alternative::Less => dist.cdf(t),
        Alternative::TwoSided => (2.0 * dist.sf(t.abs())).min(1.0),
    };
    Ok(TestResult { raw_p, adjusted_p: raw_p, statistic: t, n_pairs: n, method: TestMethod::PairedT })
}
