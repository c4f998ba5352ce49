//! Online Kohonen self-organizing map on a ring or rectangular grid.

use ndarray::{Array2, ArrayView2};
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::{nearest, ClusterResult};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Topology {
    Ring { nodes: usize },
    Grid { rows: usize, cols: usize },
}

impl Topology {
    /// Grid with exactly `k` nodes, as square as the divisors of `k` allow
    /// (25 → 5×5, 72 → 8×9, 13 → 1×13).
    pub fn grid_for(k: usize) -> Self {
        let mut rows = 1;
        let mut r = 1;
        while r * r <= k {
            if k % r == 0 {
                rows = r;
            }
            r += 1;
        }
        Topology::Grid {
            rows,
            cols: k / rows.max(1),
        }
    }

    pub fn nodes(&self) -> usize {
        match *self {
            Topology::Ring { nodes } => nodes,
            Topology::Grid { rows, cols } => rows * cols,
        }
    }

    /// Lattice distance: circular index distance on a ring, Manhattan on a
    /// grid (nodes numbered row-major).
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        match *self {
            Topology::Ring { nodes } => {
                let d = a.abs_diff(b);
                d.min(nodes - d) as f64
            }
            Topology::Grid { cols, .. } => {
                let (ra, ca) = (a / cols, a % cols);
                let (rb, cb) = (b / cols, b % cols);
                (ra.abs_diff(rb) + ca.abs_diff(cb)) as f64
            }
        }
    }

    pub fn default_radius0(&self) -> f64 {
        match *self {
            Topology::Ring { nodes } => nodes as f64 / 2.0,
            Topology::Grid { rows, cols } => rows.max(cols) as f64 / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomConfig {
    pub topology: Topology,
    pub epochs: usize,
    pub lr0: f64,
    pub lr_final: f64,
    /// Defaults to [`Topology::default_radius0`] when unset.
    pub radius0: Option<f64>,
    pub radius_final: f64,
    pub seed: u64,
}

impl SomConfig {
    pub fn new(topology: Topology, seed: u64) -> Self {
        Self {
            topology,
            epochs: 50,
            lr0: 0.5,
            lr_final: 0.01,
            radius0: None,
            radius_final: 0.5,
            seed,
        }
    }

    pub fn radius0(&self) -> f64 {
        self.radius0.unwrap_or_else(|| self.topology.default_radius0())
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.topology.nodes() == 0 {
            return bad("SOM needs at least one node".into());
        }
        if !(self.lr0 > 0.0 && self.lr0 <= 1.0) {
            return bad(format!("lr0 must lie in (0, 1], got {}", self.lr0));
        }
        if !(self.lr_final > 0.0 && self.lr_final <= self.lr0) {
            return bad(format!("need lr0 >= lr_final > 0, got lr_final = {}", self.lr_final));
        }
        let r0 = self.radius0();
        if !(self.radius_final > 0.0 && self.radius_final <= r0) {
            return bad(format!(
                "need radius0 >= radius_final > 0, got {r0} and {}",
                self.radius_final
            ));
        }
        Ok(())
    }
}

/// `start · (end / start)^(s / (total - 1))`: equals `start` at the first
/// step and `end` at the last.
fn exp_decay(start: f64, end: f64, step: usize, total: usize) -> f64 {
    if total <= 1 {
        return start;
    }
    start * (end / start).powf(step as f64 / (total - 1) as f64)
}

pub fn som_fit(x: ArrayView2<f64>, cfg: &SomConfig) -> Result<ClusterResult> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("SOM needs at least one point".into()));
    }
    cfg.validate()?;
    let nodes = cfg.topology.nodes();
    let dim = x.ncols();

    let mut rng = seed::child_rng(cfg.seed, &[seed::tag("som")]);

    // Initial weights are distinct input points; with more nodes than points
    // the sample wraps around.
    let init: Vec<usize> = if nodes <= n {
        index::sample(&mut rng, n, nodes).into_vec()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        (0..nodes).map(|i| all[i % n]).collect()
    };
    let mut weights = Array2::zeros((nodes, dim));
    for (node, &i) in init.iter().enumerate() {
        weights.row_mut(node).assign(&x.row(i));
    }

    let topo_d2: Vec<f64> = (0..nodes * nodes)
        .map(|ab| {
            let d = cfg.topology.distance(ab / nodes, ab % nodes);
            d * d
        })
        .collect();

    let total = cfg.epochs * n;
    let radius0 = cfg.radius0();
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let lr = exp_decay(cfg.lr0, cfg.lr_final, step, total);
            let radius = exp_decay(radius0, cfg.radius_final, step, total);
            let denom = 2.0 * radius * radius;
            let xi = x.row(i);
            let (bmu, _) = nearest(weights.view(), xi);
            for (node, mut w) in weights.rows_mut().into_iter().enumerate() {
                let h = (-topo_d2[node * nodes + bmu] / denom).exp();
                let a = lr * h;
                for (wv, &xv) in w.iter_mut().zip(xi.iter()) {
                    *wv += a * (xv - *wv);
                }
            }
            step += 1;
        }
    }

    Ok(ClusterResult::from_centers(x, weights))
}
