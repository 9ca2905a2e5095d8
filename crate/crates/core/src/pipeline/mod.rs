//! Ingestion, synthetic cohorts, the split/tune/test protocol and reports.

pub mod config;
pub mod experiment;
pub mod ingest;
pub mod report;
pub mod synth;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use config::KeyValues;
pub use experiment::{run_experiment, run_target_encoding_comparison, ExperimentConfig};
pub use ingest::{ingest, read_records, write_records, AttritionLog, FilterRule, IngestConfig};
pub use report::{DetailRow, ExperimentReport, SummaryRow};
pub use synth::{synthesize, SynthConfig};

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Encoded dataset as CSV: `id`, the feature columns, then `graft_days` and `event`.
pub fn write_dataset<W: Write>(data: &crate::survival::SurvivalDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(data.features.column_names().iter().cloned());
    header.extend(["graft_days".to_string(), "event".to_string()]);
    w.write_record(&header)?;
    for i in 0..data.n_rows() {
        let mut cells = vec![data.row_ids[i].clone()];
        cells.extend(data.features.row(i).iter().map(|v| v.to_string()));
        cells.push(data.targets[i].time.to_string());
        cells.push((data.targets[i].event as u8).to_string());
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}
