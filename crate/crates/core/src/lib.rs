//! Vertical clustering of elliptical helical point clouds.
//!
//! The crate synthesizes scans of an elliptical tube bent into an elliptical
//! helix, clusters them with K-medoids (PAM) or a Kohonen SOM, and measures
//! how many clusters can be requested before they stop being thin angular
//! slices of the helix sweep.
//!
//! Two strategies are provided:
//!
//! * a baseline that clusters raw `(x, y, z)` coordinates of the whole cloud;
//! * the turn-wise strategy: split the cloud into helix turns, cluster each
//!   turn on its `(x, y)` projection, then merge the labels back onto the
//!   original 3D points.
//!
//! For scans with a fixed number of samples per cross-section the labels can
//! be assigned by index alone, see [`pipeline::sequence_label`].

pub mod cli;
pub mod clustering;
pub mod error;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod seed;
pub mod verticality;

pub use clustering::{ClusterResult, KMedoidsConfig, SomConfig, Topology};
pub use error::{Error, Result};
pub use geometry::{HelixParams, PointCloud, Provenance, ScanMode, SurfacePoint, Truth};
pub use pipeline::{Algo, FeatureSet, FitConfig, LabeledCloud, Method, SplitMethod};
pub use verticality::{ThresholdResult, VerticalityReport};
