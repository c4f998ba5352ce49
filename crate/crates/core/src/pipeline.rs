//! End-to-end labeling strategies.
//!
//! * [`baseline_cluster3d`]: fit on raw `(x, y, z)` of the whole cloud.
//! * [`vertical_cluster`]: split into helix turns, fit each turn on its
//!   `(x, y)` projection and merge the local labels back as
//!   `turn * k + local`, so `label / k` recovers the turn and isolating one
//!   slice is a filter on a single label value.
//! * [`sequence_label`]: index-based labels for scans with a fixed number of
//!   samples per cross-section.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::clustering::{kmedoids_fit, som_fit, ClusterResult, KMedoidsConfig, SomConfig, Topology};
use crate::error::{Error, Result};
use crate::geometry::{project_to_centerline, HelixParams, PointCloud, ScanMode};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Kmedoids,
    Som,
    /// Index-based labeling, no clustering.
    #[value(skip)]
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Xy,
    Xyz,
    /// Point index only (sequence labeling).
    #[value(skip)]
    Index,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    /// Nearest centerline parameter.
    Model,
    /// Horizontal slabs one pitch tall, starting at the lowest point.
    Zslab,
    /// Ground-truth turn stored with synthetic points.
    Truth,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SomTopologyKind {
    Ring,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Method {
    pub algo: Algo,
    pub features: FeatureSet,
    pub turn_split: SplitMethod,
}

/// Per-turn fit statistics kept alongside the merged labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub turn: usize,
    pub k: usize,
    pub cost: f64,
    pub sizes: Vec<usize>,
    pub empty_clusters: usize,
}

impl FitSummary {
    fn new(turn: usize, r: &ClusterResult) -> Self {
        Self {
            turn,
            k: r.k(),
            cost: r.cost,
            sizes: r.sizes.clone(),
            empty_clusters: r.empty_clusters,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    pub cloud: PointCloud,
    /// Global labels, unique across turns.
    pub labels: Vec<usize>,
    pub k_per_turn: usize,
    pub method: Method,
    pub fits: Vec<FitSummary>,
}

impl LabeledCloud {
    /// Turn encoded in a global label.
    pub fn turn_of(&self, label: usize) -> usize {
        label / self.k_per_turn.max(1)
    }

    /// Indices of the points carrying `label`.
    pub fn isolate(&self, label: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == label).then_some(i))
            .collect()
    }
}

/// Algorithm settings shared by every fit in a run. `k` and the per-fit seed
/// are supplied separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_swap_iters: usize,
    /// `None` picks a ring for `xy` features and a near-square grid for `xyz`.
    pub som_topology: Option<SomTopologyKind>,
    pub epochs: usize,
    pub lr0: f64,
    pub lr_final: f64,
    pub radius0: Option<f64>,
    pub radius_final: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_swap_iters: 100,
            som_topology: None,
            epochs: 50,
            lr0: 0.5,
            lr_final: 0.01,
            radius0: None,
            radius_final: 0.5,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn kmedoids(&self, k: usize, seed: u64) -> KMedoidsConfig {
        KMedoidsConfig {
            k,
            restarts: self.restarts,
            max_swap_iters: self.max_swap_iters,
            seed,
        }
    }

    pub fn som(&self, k: usize, seed: u64, features: FeatureSet) -> SomConfig {
        let kind = self.som_topology.unwrap_or(match features {
            FeatureSet::Xyz => SomTopologyKind::Grid,
            _ => SomTopologyKind::Ring,
        });
        let topology = match kind {
            SomTopologyKind::Ring => Topology::Ring { nodes: k },
            SomTopologyKind::Grid => Topology::grid_for(k),
        };
        SomConfig {
            topology,
            epochs: self.epochs,
            lr0: self.lr0,
            lr_final: self.lr_final,
            radius0: self.radius0,
            radius_final: self.radius_final,
            seed,
        }
    }

    fn turn_seed(&self, turn: usize) -> u64 {
        seed::derive(self.seed, &[seed::tag("turn"), turn as u64])
    }
}

/// Partitions point indices by helix turn, ordered by turn index.
pub fn turn_split(
    cloud: &PointCloud,
    p: &HelixParams,
    method: SplitMethod,
) -> Result<Vec<(usize, Vec<usize>)>> {
    if cloud.is_empty() {
        return Ok(Vec::new());
    }
    let last = p.turn_count() - 1;
    let turns: Vec<usize> = match method {
        SplitMethod::None => vec![0; cloud.len()],
        SplitMethod::Truth => cloud
            .points
            .iter()
            .enumerate()
            .map(|(i, q)| {
                q.truth
                    .map(|t| t.turn as usize)
                    .ok_or(Error::MissingTruth { index: i })
            })
            .collect::<Result<_>>()?,
        SplitMethod::Model => {
            p.validate()?;
            cloud
                .points
                .iter()
                .map(|q| {
                    let t = project_to_centerline(q.xyz(), p);
                    ((t / TAU).floor().max(0.0) as usize).min(last)
                })
                .collect()
        }
        SplitMethod::Zslab => {
            p.validate()?;
            let z_min = cloud.points.iter().map(|q| q.z).fold(f64::INFINITY, f64::min);
            cloud
                .points
                .iter()
                .map(|q| (((q.z - z_min) / p.pitch).floor().max(0.0) as usize).min(last))
                .collect()
        }
    };
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, t) in turns.into_iter().enumerate() {
        groups.entry(t).or_default().push(i);
    }
    Ok(groups.into_iter().collect())
}

/// `(x, y)` rows of the selected points, in the given order.
pub fn project_xy(cloud: &PointCloud, indices: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((indices.len(), 2), |(r, c)| {
        let q = &cloud.points[indices[r]];
        if c == 0 {
            q.x
        } else {
            q.y
        }
    })
}

fn project_xyz(cloud: &PointCloud, indices: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((indices.len(), 3), |(r, c)| cloud.points[indices[r]].xyz()[c])
}

fn fit(
    x: &Array2<f64>,
    algo: Algo,
    k: usize,
    cfg: &FitConfig,
    seed: u64,
    features: FeatureSet,
) -> Result<ClusterResult> {
    match algo {
        Algo::Kmedoids => kmedoids_fit(x.view(), &cfg.kmedoids(k, seed)),
        Algo::Som => som_fit(x.view(), &cfg.som(k, seed, features)),
        Algo::Sequence => Err(Error::InvalidArgument(
            "sequence labeling is not a clustering algorithm".into(),
        )),
    }
}

fn cluster_groups(
    cloud: &PointCloud,
    groups: Vec<(usize, Vec<usize>)>,
    method: Method,
    k: usize,
    cfg: &FitConfig,
) -> Result<LabeledCloud> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if let Some((turn, g)) = groups.iter().find(|(_, g)| g.len() < k) {
        return Err(Error::UndersizedTurn {
            turn: *turn,
            size: g.len(),
            k,
        });
    }
    let mut labels = vec![0; cloud.len()];
    let mut fits = Vec::with_capacity(groups.len());
    for (turn, indices) in &groups {
        let x = match method.features {
            FeatureSet::Xy => project_xy(cloud, indices),
            _ => project_xyz(cloud, indices),
        };
        let r = fit(&x, method.algo, k, cfg, cfg.turn_seed(*turn), method.features)?;
        for (&i, &local) in indices.iter().zip(&r.labels) {
            labels[i] = turn * k + local;
        }
        fits.push(FitSummary::new(*turn, &r));
    }
    Ok(LabeledCloud {
        cloud: cloud.clone(),
        labels,
        k_per_turn: k,
        method,
        fits,
    })
}

/// Turn split, 2D clustering per turn, merge back onto the 3D points.
pub fn vertical_cluster(
    cloud: &PointCloud,
    p: &HelixParams,
    algo: Algo,
    k: usize,
    cfg: &FitConfig,
    split: SplitMethod,
) -> Result<LabeledCloud> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let groups = turn_split(cloud, p, split)?;
    let method = Method {
        algo,
        features: FeatureSet::Xy,
        turn_split: split,
    };
    cluster_groups(cloud, groups, method, k, cfg)
}

/// Conventional clustering on raw `(x, y, z)` of the whole cloud.
pub fn baseline_cluster3d(
    cloud: &PointCloud,
    algo: Algo,
    k: usize,
    cfg: &FitConfig,
) -> Result<LabeledCloud> {
    if k > cloud.len() {
        return Err(Error::TooFewPoints { k, n: cloud.len() });
    }
    let groups = vec![(0, (0..cloud.len()).collect())];
    let method = Method {
        algo,
        features: FeatureSet::Xyz,
        turn_split: SplitMethod::None,
    };
    cluster_groups(cloud, groups, method, k, cfg)
}

/// Dispatches on `features` and `split`: `xyz` without a split is the
/// baseline, `xy` is the turn-wise strategy. `xyz` with a split clusters
/// each turn in 3D.
pub fn cluster(
    cloud: &PointCloud,
    p: &HelixParams,
    algo: Algo,
    features: FeatureSet,
    split: SplitMethod,
    k: usize,
    cfg: &FitConfig,
) -> Result<LabeledCloud> {
    match (features, split) {
        (FeatureSet::Xyz, SplitMethod::None) => baseline_cluster3d(cloud, algo, k, cfg),
        (FeatureSet::Xy, _) => vertical_cluster(cloud, p, algo, k, cfg, split),
        (FeatureSet::Xyz, _) => {
            let groups = turn_split(cloud, p, split)?;
            let method = Method {
                algo,
                features,
                turn_split: split,
            };
            cluster_groups(cloud, groups, method, k, cfg)
        }
        (FeatureSet::Index, _) => Err(Error::InvalidArgument(
            "index features are only produced by sequence labeling".into(),
        )),
    }
}

/// Labels consecutive runs of `points_per_section` points as one
/// cross-section each. The cloud must come from a sequence-depending scan
/// (or an external file the caller vouches for).
pub fn sequence_label(cloud: &PointCloud, points_per_section: usize) -> Result<LabeledCloud> {
    if cloud.provenance.mode == ScanMode::Flexible {
        return Err(Error::InvalidArgument(
            "sequence labeling needs a sequential scan, got a flexible one".into(),
        ));
    }
    if points_per_section == 0 {
        return Err(Error::InvalidArgument("points per section must be positive".into()));
    }
    let n = cloud.len();
    if n == 0 || n % points_per_section != 0 {
        return Err(Error::NotDivisible {
            points: n,
            per_section: points_per_section,
        });
    }
    let labels: Vec<usize> = (0..n).map(|i| i / points_per_section).collect();
    let groups = n / points_per_section;

    // Sections per turn: the most sections any single turn holds.
    let k_per_turn = if cloud.has_truth() {
        let mut per_turn: BTreeMap<u32, usize> = BTreeMap::new();
        for s in 0..groups {
            let turn = cloud.points[s * points_per_section].truth.unwrap().turn;
            *per_turn.entry(turn).or_default() += 1;
        }
        per_turn.values().copied().max().unwrap_or(groups)
    } else {
        groups
    };

    Ok(LabeledCloud {
        cloud: cloud.clone(),
        labels,
        k_per_turn,
        method: Method {
            algo: Algo::Sequence,
            features: FeatureSet::Index,
            turn_split: SplitMethod::None,
        },
        fits: Vec::new(),
    })
}
