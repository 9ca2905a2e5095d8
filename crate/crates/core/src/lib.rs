//! Censoring-aware prediction of kidney graft survival from donor and
//! recipient covariates and HLA typing.
//!
//! The crate covers HLA mismatch and pair encodings, an elastic-net Cox
//! model, random survival forests, gradient-boosted Cox trees, Harrell's
//! concordance and IPCW dynamic AUC, and the repeated-split significance
//! protocol used to compare feature sets.

pub mod coxnet;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod hla;
pub mod model;
pub mod pipeline;
pub mod record;
pub mod survival;

pub use error::{Error, Result};
