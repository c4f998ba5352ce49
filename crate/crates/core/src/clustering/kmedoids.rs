//! Partitioning Around Medoids: greedy BUILD followed by best-improvement
//! SWAP.
//!
//! SWAP evaluates every (medoid, non-medoid) exchange per iteration. The
//! deltas of all `k` exchanges involving one candidate are accumulated in a
//! single pass over the points using nearest / second-nearest medoid
//! distances, which yields the same costs as recomputing the objective for
//! each exchange.
//!
//! Both phases only need, for a candidate `c`, the points `j` that are
//! closer to `c` than to their current nearest (BUILD) or second-nearest
//! (SWAP) medoid. A kd-tree whose nodes carry the largest such distance
//! inside them lets a candidate skip whole boxes that are too far away.
//! Skipped points cannot move the objective, so the result is exact.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ClusterResult;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMedoidsConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_swap_iters: usize,
    pub seed: u64,
}

impl KMedoidsConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            restarts: 5,
            max_swap_iters: 100,
            seed,
        }
    }
}

const LEAF_SIZE: usize = 16;

/// Points plus a static kd-tree over them.
struct Space {
    n: usize,
    dim: usize,
    data: Vec<f64>,
    nodes: Vec<Node>,
    /// Bounding boxes, `2 * dim` values per node: minima then maxima.
    boxes: Vec<f64>,
    /// Point indices in leaf order; every node owns a contiguous range.
    perm: Vec<usize>,
}

struct Node {
    start: usize,
    end: usize,
    /// Child node indices, `None` for a leaf.
    children: Option<(usize, usize)>,
}

impl Space {
    fn new(x: ArrayView2<f64>) -> Self {
        let (n, dim) = x.dim();
        let mut s = Self {
            n,
            dim,
            data: x.iter().copied().collect(),
            nodes: Vec::new(),
            boxes: Vec::new(),
            perm: (0..n).collect(),
        };
        if n > 0 {
            s.split(0, n);
        }
        s
    }

    fn coord(&self, i: usize, c: usize) -> f64 {
        self.data[i * self.dim + c]
    }

    /// Adds the node for `perm[start..end]` and its subtree; returns its index.
    fn split(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for &i in &self.perm[start..end] {
            for c in 0..self.dim {
                lo[c] = lo[c].min(self.coord(i, c));
                hi[c] = hi[c].max(self.coord(i, c));
            }
        }
        self.boxes.extend_from_slice(&lo);
        self.boxes.extend_from_slice(&hi);
        self.nodes.push(Node {
            start,
            end,
            children: None,
        });
        if end - start > LEAF_SIZE {
            let axis = (0..self.dim)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
                .unwrap_or(0);
            let mut part = std::mem::take(&mut self.perm);
            part[start..end].sort_by(|&a, &b| {
                self.coord(a, axis)
                    .total_cmp(&self.coord(b, axis))
                    .then(a.cmp(&b))
            });
            self.perm = part;
            let mid = start + (end - start) / 2;
            let left = self.split(start, mid);
            let right = self.split(mid, end);
            self.nodes[id].children = Some((left, right));
        }
        id
    }

    #[inline]
    fn dist(&self, i: usize, j: usize) -> f64 {
        let a = &self.data[i * self.dim..(i + 1) * self.dim];
        let b = &self.data[j * self.dim..(j + 1) * self.dim];
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest per-point radius inside each node.
    fn reach(&self, radius: &[f64]) -> Vec<f64> {
        let mut bound = vec![0.0f64; self.nodes.len()];
        // Children are created after their parent.
        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            bound[id] = match node.children {
                Some((l, r)) => bound[l].max(bound[r]),
                None => self.perm[node.start..node.end]
                    .iter()
                    .map(|&j| radius[j])
                    .fold(f64::NEG_INFINITY, f64::max),
            };
        }
        bound
    }

    /// Calls `f` on a superset of the points `j` with `dist(i, j) <
    /// radius[j]`, where `reach` came from [`Space::reach`] on `radius`.
    #[inline]
    fn near_each(&self, i: usize, reach: &[f64], f: impl FnMut(usize)) {
        self.visit(i, |id| reach[id], f);
    }

    /// Calls `f` on a superset of the points within `r` of `i`.
    fn within(&self, i: usize, r: f64, f: impl FnMut(usize)) {
        self.visit(i, |_| r, f);
    }

    /// Visits the leaves whose box lies closer to `i` than `bound(node)`.
    #[inline]
    fn visit(&self, i: usize, bound: impl Fn(usize) -> f64, mut f: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let q = &self.data[i * self.dim..(i + 1) * self.dim];
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            // Slack so rounding in `dist` can never admit a pruned point.
            let r = bound(id) * (1.0 + 1e-9) + 1e-300;
            let bx = &self.boxes[id * 2 * self.dim..(id + 1) * 2 * self.dim];
            let mut gap = 0.0;
            for c in 0..self.dim {
                let d = (bx[c] - q[c]).max(q[c] - bx[self.dim + c]).max(0.0);
                gap += d * d;
            }
            if !(gap < r * r) {
                continue;
            }
            let node = &self.nodes[id];
            match node.children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => self.perm[node.start..node.end].iter().for_each(|&j| f(j)),
            }
        }
    }
}

/// Nearest and second-nearest medoid per point.
struct Assignment {
    nearest: Vec<usize>,
    d_near: Vec<f64>,
    d_second: Vec<f64>,
}

impl Assignment {
    fn compute(s: &Space, medoids: &[usize]) -> Self {
        let n = s.n;
        let mut a = Assignment {
            nearest: vec![0; n],
            d_near: vec![f64::INFINITY; n],
            d_second: vec![f64::INFINITY; n],
        };
        for j in 0..n {
            for (slot, &m) in medoids.iter().enumerate() {
                let v = s.dist(m, j);
                if v < a.d_near[j] {
                    a.d_second[j] = a.d_near[j];
                    a.d_near[j] = v;
                    a.nearest[j] = slot;
                } else if v < a.d_second[j] {
                    a.d_second[j] = v;
                }
            }
        }
        a
    }

    fn cost(&self) -> f64 {
        self.d_near.iter().sum()
    }
}

/// BUILD. The first medoid is `first`, or else the point with the smallest
/// total distance to all others; each further medoid is the non-medoid with
/// the largest cost reduction. Ties go to the smaller `rank` (the point
/// index when `rank` is `None`).
///
/// Reductions can only shrink as medoids are added, so stale values are
/// upper bounds and the greedy choice is found lazily: a candidate whose
/// freshly recomputed reduction still tops the queue is the exact argmax.
fn build(s: &Space, k: usize, first: Option<usize>, rank: Option<&[usize]>) -> Vec<usize> {
    let n = s.n;
    let rank_of = |i: usize| rank.map_or(i, |r| r[i]);
    let mut medoids = Vec::with_capacity(k);

    let first = first.unwrap_or_else(|| {
        let mut best = (0, f64::INFINITY);
        for i in 0..n {
            let total: f64 = (0..n).map(|j| s.dist(i, j)).sum();
            if total < best.1 || (total == best.1 && rank_of(i) < rank_of(best.0)) {
                best = (i, total);
            }
        }
        best.0
    });
    medoids.push(first);
    let mut near: Vec<f64> = (0..n).map(|j| s.dist(first, j)).collect();

    let gain = |i: usize, near: &[f64], reach: &[f64]| -> f64 {
        let mut g = 0.0;
        s.near_each(i, reach, |j| {
            let d = s.dist(i, j);
            if d < near[j] {
                g += near[j] - d;
            }
        });
        g
    };

    let mut queue = BinaryHeap::with_capacity(n);
    if k > 1 {
        let reach = s.reach(&near);
        for i in (0..n).filter(|&i| i != first) {
            queue.push(Bound {
                gain: gain(i, &near, &reach),
                rank: rank_of(i),
                index: i,
                step: 1,
            });
        }
    }

    while medoids.len() < k {
        let step = medoids.len();
        let reach = s.reach(&near);
        let pick = loop {
            let top = queue.pop().expect("k <= n leaves a candidate");
            if top.step == step {
                break top.index;
            }
            queue.push(Bound {
                gain: gain(top.index, &near, &reach),
                rank: top.rank,
                index: top.index,
                step,
            });
        };
        medoids.push(pick);
        for j in 0..n {
            let d = s.dist(pick, j);
            if d < near[j] {
                near[j] = d;
            }
        }
    }
    medoids
}

/// Upper bound on a BUILD candidate's reduction, computed at `step`.
/// Ordered by gain, then by smaller rank.
struct Bound {
    gain: f64,
    rank: usize,
    index: usize,
    step: usize,
}

impl PartialEq for Bound {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Bound {}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.rank.cmp(&self.rank))
    }
}

/// Best-improvement SWAP. Returns the final assignment and the number of
/// accepted exchanges; `medoids` is updated in place. Every accepted
/// exchange strictly lowers the cost.
///
/// A candidate's exchange deltas are the per-medoid removal costs plus
/// point contributions that depend only on the nearby points' nearest slot,
/// nearest and second-nearest distances. Those contributions are cached and
/// recomputed only for candidates near a point whose assignment changed.
fn swap(s: &Space, medoids: &mut [usize], max_iters: usize) -> (Assignment, usize) {
    let n = s.n;
    let k = medoids.len();
    let mut assign = Assignment::compute(s, medoids);
    let mut cost = assign.cost();
    let mut is_medoid = vec![false; n];
    for &m in medoids.iter() {
        is_medoid[m] = true;
    }
    let mut local = vec![0.0; n * k];
    let mut shared = vec![0.0; n];
    let mut stale = vec![true; n];
    let mut swaps = 0;

    for _ in 0..max_iters {
        let mut best: Option<(f64, usize, usize)> = None;
        if k == 1 {
            for c in (0..n).filter(|&c| !is_medoid[c]) {
                let total: f64 = (0..n).map(|j| s.dist(c, j)).sum();
                let dl = total - cost;
                if best.map_or(true, |(b, _, _)| dl < b) {
                    best = Some((dl, 0, c));
                }
            }
        } else {
            // Cost of dropping each medoid with no replacement.
            let mut removal = vec![0.0; k];
            for j in 0..n {
                removal[assign.nearest[j]] += assign.d_second[j] - assign.d_near[j];
            }
            let reach = s.reach(&assign.d_second);
            for c in 0..n {
                if is_medoid[c] {
                    continue;
                }
                let delta = &mut local[c * k..(c + 1) * k];
                if stale[c] {
                    delta.fill(0.0);
                    let mut sh = 0.0;
                    s.near_each(c, &reach, |j| {
                        let dcj = s.dist(c, j);
                        let dn = assign.d_near[j];
                        if dcj < dn {
                            sh += dcj - dn;
                            delta[assign.nearest[j]] += dn - assign.d_second[j];
                        } else if dcj < assign.d_second[j] {
                            delta[assign.nearest[j]] += dcj - assign.d_second[j];
                        }
                    });
                    shared[c] = sh;
                    stale[c] = false;
                }
                for (slot, &dm) in delta.iter().enumerate() {
                    let dl = removal[slot] + dm + shared[c];
                    if best.map_or(true, |(b, _, _)| dl < b) {
                        best = Some((dl, slot, c));
                    }
                }
            }
        }

        let Some((dl, slot, c)) = best else { break };
        if !(dl < -1e-12 * cost.max(1.0)) {
            break;
        }
        let old = medoids[slot];
        medoids[slot] = c;
        let next = Assignment::compute(s, medoids);
        let next_cost = next.cost();
        if next_cost >= cost {
            medoids[slot] = old;
            break;
        }
        for j in 0..n {
            if next.nearest[j] != assign.nearest[j]
                || next.d_near[j] != assign.d_near[j]
                || next.d_second[j] != assign.d_second[j]
            {
                let r = next.d_second[j].max(assign.d_second[j]);
                s.within(j, r, |c| stale[c] = true);
            }
        }
        stale[old] = true;
        is_medoid[old] = false;
        is_medoid[c] = true;
        assign = next;
        cost = next_cost;
        swaps += 1;
    }
    (assign, swaps)
}

fn fit_medoids(s: &Space, cfg: &KMedoidsConfig) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut tried: Vec<Vec<usize>> = Vec::new();
    for r in 0..cfg.restarts.max(1) {
        // Restart 0 is the plain BUILD. Later restarts start BUILD from a
        // random first medoid and break its ties by a random permutation.
        // Restarts whose BUILD repeats an earlier one are skipped.
        let (first, rank) = if r == 0 {
            (None, None)
        } else {
            let mut rng = seed::child_rng(cfg.seed, &[seed::tag("kmedoids_restart"), r as u64]);
            let mut perm: Vec<usize> = (0..s.n).collect();
            perm.shuffle(&mut rng);
            (Some(rng.gen_range(0..s.n)), Some(perm))
        };
        let mut medoids = build(s, cfg.k, first, rank.as_deref());
        let mut key = medoids.clone();
        key.sort_unstable();
        if tried.contains(&key) {
            continue;
        }
        tried.push(key);
        let (assign, swaps) = swap(s, &mut medoids, cfg.max_swap_iters);
        let cost = assign.cost();
        log::debug!("kmedoids restart {r}: {swaps} swaps, cost {cost}");
        if best.as_ref().map_or(true, |(b, _)| cost < *b) {
            best = Some((cost, medoids));
        }
    }
    best.expect("at least one restart").1
}

/// Fits `cfg.k` medoids to the rows of `x`.
///
/// The returned centers are exact copies of rows of `x`, in medoid-slot
/// order; labels assign each point to its nearest center.
pub fn kmedoids_fit(x: ArrayView2<f64>, cfg: &KMedoidsConfig) -> Result<ClusterResult> {
    let n = x.nrows();
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if cfg.k > n {
        return Err(Error::TooFewPoints { k: cfg.k, n });
    }
    if x.ncols() == 0 {
        return Err(Error::InvalidArgument("feature dimension must be at least 1".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("features must be finite".into()));
    }
    let medoids = fit_medoids(&Space::new(x), cfg);
    let mut centers = Array2::zeros((cfg.k, x.ncols()));
    for (slot, &m) in medoids.iter().enumerate() {
        centers.row_mut(slot).assign(&x.row(m));
    }
    Ok(ClusterResult::from_centers(x, centers))
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use rand::Rng;

    use super::*;

    fn fit(x: &Array2<f64>, k: usize) -> ClusterResult {
        kmedoids_fit(x.view(), &KMedoidsConfig::new(k, 1)).unwrap()
    }

    fn total_cost(s: &Space, medoids: &[usize]) -> f64 {
        (0..s.n)
            .map(|j| medoids.iter().map(|&m| s.dist(m, j)).fold(f64::INFINITY, f64::min))
            .sum()
    }

    #[test]
    fn line_of_three_single_medoid() {
        let x = array![[0.0], [1.0], [10.0]];
        let r = fit(&x, 1);
        assert_eq!(r.centers, array![[1.0]]);
        assert_eq!(r.cost, 10.0);
        assert_eq!(r.labels, vec![0, 0, 0]);
    }

    #[test]
    fn k_equals_n_is_zero_cost() {
        let x = array![[0.0, 1.0], [3.0, 2.0], [5.0, 5.0], [-1.0, 0.5]];
        let r = fit(&x, 4);
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.empty_clusters, 0);
        assert!(r.sizes.iter().all(|&s| s == 1));
    }

    #[test]
    fn rejects_k_above_n_and_zero() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(
            kmedoids_fit(x.view(), &KMedoidsConfig::new(3, 0)),
            Err(Error::TooFewPoints { k: 3, n: 2 })
        ));
        assert!(kmedoids_fit(x.view(), &KMedoidsConfig::new(0, 0)).is_err());
        let bad = array![[0.0], [f64::NAN]];
        assert!(kmedoids_fit(bad.view(), &KMedoidsConfig::new(1, 0)).is_err());
    }

    #[test]
    fn duplicates_are_allowed() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [4.0, 4.0]];
        let r = fit(&x, 3);
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.sizes.iter().sum::<usize>(), 4);
        let r = fit(&x, 2);
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.empty_clusters, 0);
    }

    #[test]
    fn two_blobs() {
        let x = array![[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [9.0, 9.0], [9.1, 9.0], [9.0, 9.1]];
        let r = fit(&x, 2);
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels[1], r.labels[2]);
        assert_eq!(r.labels[3], r.labels[4]);
        assert_ne!(r.labels[0], r.labels[3]);
    }

    #[test]
    fn swap_reaches_optimum_from_bad_start() {
        let x = array![[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]];
        let s = Space::new(x.view());
        let mut medoids = vec![0, 1];
        let (a, swaps) = swap(&s, &mut medoids, 100);
        assert!(swaps >= 1);
        medoids.sort_unstable();
        assert_eq!(medoids, vec![1, 4]);
        assert_eq!(a.cost(), 4.0);
    }

    /// Brute-force BUILD step and SWAP step: recompute the objective for
    /// every candidate.
    #[test]
    fn pruned_steps_match_brute_force() {
        let mut rng = seed::rng(11);
        for trial in 0..20 {
            let n = 60 + trial;
            let x = Array2::from_shape_fn((n, 3), |(_, c)| rng.gen_range(-5.0..5.0) * (c + 1) as f64);
            let s = Space::new(x.view());
            let k = 2 + trial % 5;

            let built = build(&s, k, None, None);
            let mut naive = Vec::new();
            for _ in 0..k {
                let best = (0..n)
                    .filter(|i| !naive.contains(i))
                    .map(|i| {
                        let mut m = naive.clone();
                        m.push(i);
                        (i, total_cost(&s, &m))
                    })
                    .fold((usize::MAX, f64::INFINITY), |b, c| if c.1 < b.1 - 1e-9 { c } else { b });
                naive.push(best.0);
            }
            assert_eq!(built, naive, "trial {trial}");

            // One SWAP iteration against exhaustive exchange evaluation.
            let mut medoids = built.clone();
            swap(&s, &mut medoids, 1);
            let base = total_cost(&s, &built);
            let mut best = (base, built.clone());
            for slot in 0..k {
                for c in (0..n).filter(|c| !built.contains(c)) {
                    let mut m = built.clone();
                    m[slot] = c;
                    let v = total_cost(&s, &m);
                    if v < best.0 - 1e-9 {
                        best = (v, m);
                    }
                }
            }
            assert_eq!(medoids, best.1, "trial {trial}");
        }
    }

    #[test]
    fn swap_cost_strictly_decreases() {
        let mut rng = seed::rng(5);
        let x = Array2::from_shape_fn((300, 2), |_| rng.gen_range(0.0..10.0));
        let s = Space::new(x.view());
        let mut medoids: Vec<usize> = (0..8).collect();
        let mut cost = total_cost(&s, &medoids);
        loop {
            let (_, swaps) = swap(&s, &mut medoids, 1);
            if swaps == 0 {
                break;
            }
            let next = total_cost(&s, &medoids);
            assert!(next < cost);
            cost = next;
        }
    }
}
