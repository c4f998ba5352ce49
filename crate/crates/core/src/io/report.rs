//! JSON run reports.
//!
//! A report echoes the full command arguments (every parameter and seed),
//! a digest of any input file, the results, and the wall-clock time. All
//! fields except `timing` are deterministic for fixed inputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::pipeline::{FitSummary, LabeledCloud};
use crate::verticality::{ThresholdResult, VerticalityReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub k_per_turn: usize,
    pub cost: f64,
    /// Point count per global label, `turns * k` entries.
    pub sizes: Vec<usize>,
    pub empty_clusters: usize,
    pub fits: Vec<FitSummary>,
}

impl ClusterSummary {
    pub fn of(lc: &LabeledCloud) -> Self {
        let slots = lc
            .fits
            .iter()
            .map(|f| (f.turn + 1) * lc.k_per_turn)
            .max()
            .unwrap_or_else(|| lc.labels.iter().max().map_or(0, |m| m + 1));
        let mut sizes = vec![0; slots];
        for &l in &lc.labels {
            if l >= sizes.len() {
                sizes.resize(l + 1, 0);
            }
            sizes[l] += 1;
        }
        Self {
            k_per_turn: lc.k_per_turn,
            cost: lc.fits.iter().map(|f| f.cost).sum(),
            empty_clusters: lc.fits.iter().map(|f| f.empty_clusters).sum(),
            sizes,
            fits: lc.fits.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    /// The command's arguments, sufficient to re-run it.
    pub scenario: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verticality: Option<VerticalityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdResult>,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(command: &str, scenario: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            scenario,
            input: None,
            cluster: None,
            verticality: None,
            threshold: None,
            timing: Timing { seconds: 0.0 },
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        fs::write(path, s)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// The report as a JSON tree without the `timing` field, for
    /// reproducibility comparisons.
    pub fn without_timing(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        Ok(v)
    }
}
