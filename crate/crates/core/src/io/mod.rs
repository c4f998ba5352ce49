//! Point-cloud files and run reports.
//!
//! Cloud CSV layout: header `x,y,z[,turn,t,phi][,label]`, one point per row,
//! dot decimal separator, `\n` line endings. Angles are radians. Floats are
//! written with 17 significant digits so a write/read cycle is exact.

mod cloud;
mod ply;
pub mod report;

use std::path::Path;

pub use cloud::{read_csv, write_cloud, write_labeled, write_plot};
pub use ply::read_ply;

use crate::error::Result;
use crate::geometry::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CloudFormat {
    Csv,
    Ply,
}

impl CloudFormat {
    /// `.ply` files are PLY, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => CloudFormat::Ply,
            _ => CloudFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Interpret `t` and `phi` columns as degrees and convert to radians.
    pub degrees: bool,
}

/// A cloud as read from disk, with its label column if it had one.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudFile {
    pub cloud: PointCloud,
    pub labels: Option<Vec<usize>>,
}

pub fn read_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    read_cloud_file(path, format, ReadOptions::default()).map(|f| f.cloud)
}

pub fn read_cloud_file(path: &Path, format: CloudFormat, opts: ReadOptions) -> Result<CloudFile> {
    match format {
        CloudFormat::Csv => read_csv(path, opts),
        CloudFormat::Ply => Ok(CloudFile {
            cloud: read_ply(path)?,
            labels: None,
        }),
    }
}
