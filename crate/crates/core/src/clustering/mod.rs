//! K-medoids (PAM) and Kohonen SOM over row-major feature matrices.
//!
//! Both algorithms use plain Euclidean distance and break nearest-center
//! ties toward the smaller index.

mod kmedoids;
mod som;

use ndarray::{Array2, ArrayView1, ArrayView2};

pub use kmedoids::{kmedoids_fit, KMedoidsConfig};
pub use som::{som_fit, SomConfig, Topology};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    /// Per-point cluster index in `[0, k)`.
    pub labels: Vec<usize>,
    /// One row per cluster: medoid coordinates or SOM node weights.
    pub centers: Array2<f64>,
    /// Sum of point-to-assigned-center distances.
    pub cost: f64,
    pub sizes: Vec<usize>,
    pub empty_clusters: usize,
}

impl ClusterResult {
    /// Assigns every row of `x` to its nearest center and tallies the result.
    pub fn from_centers(x: ArrayView2<f64>, centers: Array2<f64>) -> Self {
        let labels = kmedoids_assign(centers.view(), x);
        let mut sizes = vec![0; centers.nrows()];
        for &l in &labels {
            sizes[l] += 1;
        }
        let empty_clusters = sizes.iter().filter(|&&s| s == 0).count();
        let cost = cost_unchecked(&labels, centers.view(), x);
        Self {
            labels,
            centers,
            cost,
            sizes,
            empty_clusters,
        }
    }

    pub fn k(&self) -> usize {
        self.centers.nrows()
    }
}

#[inline]
pub(crate) fn euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Nearest center per row of `x`; ties go to the smaller center index.
pub fn kmedoids_assign(centers: ArrayView2<f64>, x: ArrayView2<f64>) -> Vec<usize> {
    assert!(centers.nrows() > 0, "at least one center required");
    x.rows()
        .into_iter()
        .map(|row| nearest(centers, row).0)
        .collect()
}

pub(crate) fn nearest(centers: ArrayView2<f64>, row: ArrayView1<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.rows().into_iter().enumerate() {
        let d = euclidean(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn cost_unchecked(labels: &[usize], centers: ArrayView2<f64>, x: ArrayView2<f64>) -> f64 {
    labels
        .iter()
        .zip(x.rows())
        .map(|(&l, row)| euclidean(row, centers.row(l)))
        .sum()
}

/// Sum of Euclidean distances from each point to the center of its label.
pub fn pairwise_cost(labels: &[usize], centers: ArrayView2<f64>, x: ArrayView2<f64>) -> Result<f64> {
    if labels.len() != x.nrows() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} points",
            labels.len(),
            x.nrows()
        )));
    }
    if centers.ncols() != x.ncols() {
        return Err(Error::InvalidArgument(format!(
            "centers have dimension {}, points {}",
            centers.ncols(),
            x.ncols()
        )));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= centers.nrows()) {
        return Err(Error::LabelOutOfRange {
            label,
            centers: centers.nrows(),
        });
    }
    Ok(cost_unchecked(labels, centers, x))
}
