//! JSON run records written next to every generated dataset.
//!
//! A record holds the full configuration and seed, so replaying it on the same
//! input reproduces the output. Wall-clock timings are left out unless asked
//! for, which keeps records of identical runs byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::ColumnRange;
use crate::metrics::Metric;
use crate::pipeline::{PipelineConfig, Provenance};

pub const TOOL: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub path: Option<String>,
    pub n: usize,
    pub d: usize,
    pub columns: Vec<String>,
    /// Min-max ranges applied before any privacy accounting.
    pub rescaling: Option<Vec<ColumnRange>>,
}

/// Distances between the input and the synthetic data. They read the raw
/// input and are not private.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metric: Metric,
    pub w1: f64,
    pub w2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub generate_seconds: f64,
    pub evaluate_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub input: InputSummary,
    pub config: PipelineConfig,
    /// Number of synthetic points.
    pub m: usize,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl RunRecord {
    /// All checks of the projection diagnostics passed.
    pub fn checks_pass(&self) -> bool {
        self.provenance.diagnostics.stability_holds && self.provenance.diagnostics.weyl_holds
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_record(path: impl AsRef<Path>) -> Result<RunRecord> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}
