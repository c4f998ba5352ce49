//! Verticality of a labeling and the threshold-number search.
//!
//! A clustering at level `k` is vertical when every nonempty cluster covers
//! a sweep-angle arc no wider than `alpha · 2π / k`, i.e. at most `alpha`
//! times an ideal equal sector. Empty clusters (possible with a SOM) do not
//! fail the verdict.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{scan_flexible, scan_sequential, HelixParams, PointCloud};
use crate::pipeline::{cluster, Algo, FeatureSet, FitConfig, LabeledCloud, SplitMethod};
use crate::seed;

pub const DEFAULT_ALPHA: f64 = 1.5;
pub const DEFAULT_RHO: f64 = 0.6;
pub const DEFAULT_TRIALS: usize = 5;

fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Length of the shortest arc containing every angle: `2π` minus the
/// widest gap between circularly consecutive angles.
pub fn circular_span(angles: &[f64]) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::InvalidArgument("circular span of no angles".into()));
    }
    let mut a: Vec<f64> = angles.iter().map(|&x| wrap_angle(x)).collect();
    a.sort_by(f64::total_cmp);
    let m = a.len();
    // Arc starting at a[0] and ending at a[m-1], i.e. the wrap-around gap.
    let mut span = a[m - 1] - a[0];
    // Arc starting at a[i+1] and wrapping round to a[i].
    for i in 0..m - 1 {
        let s = (a[i] - a[i + 1]) + TAU;
        if s < span {
            span = s;
        }
    }
    Ok(span)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalityReport {
    pub k: usize,
    pub nonempty: usize,
    /// Span per nonempty cluster, ordered by label.
    pub per_cluster_span: Vec<f64>,
    pub max_span: f64,
    pub alpha: f64,
    pub vertical: bool,
    pub purity: f64,
}

impl VerticalityReport {
    pub fn ideal_span(&self) -> f64 {
        TAU / self.k as f64
    }

    pub fn mean_span(&self) -> f64 {
        self.per_cluster_span.iter().sum::<f64>() / self.per_cluster_span.len() as f64
    }
}

pub fn verticality_report(lc: &LabeledCloud, alpha: f64) -> Result<VerticalityReport> {
    if !(alpha >= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be at least 1, got {alpha}")));
    }
    if lc.labels.len() != lc.cloud.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} points",
            lc.labels.len(),
            lc.cloud.len()
        )));
    }
    if lc.cloud.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty cloud".into()));
    }
    let k = lc.k_per_turn.max(1);
    let sector_width = TAU / k as f64;

    let mut members: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut sectors: BTreeMap<usize, BTreeMap<(u32, usize), usize>> = BTreeMap::new();
    for (i, (q, &label)) in lc.cloud.points.iter().zip(&lc.labels).enumerate() {
        let truth = q.truth.ok_or(Error::MissingTruth { index: i })?;
        let angle = wrap_angle(truth.t);
        members.entry(label).or_default().push(angle);
        let sector = ((angle / sector_width).floor() as usize).min(k - 1);
        *sectors
            .entry(label)
            .or_default()
            .entry((truth.turn, sector))
            .or_default() += 1;
    }

    let per_cluster_span = members
        .values()
        .map(|a| circular_span(a))
        .collect::<Result<Vec<_>>>()?;
    let max_span = per_cluster_span.iter().copied().fold(0.0, f64::max);

    // Majority sector per cluster; BTreeMap order makes ties go to the
    // smallest (turn, sector).
    let agree: usize = sectors
        .values()
        .map(|counts| {
            let mut best = 0;
            for &c in counts.values() {
                if c > best {
                    best = c;
                }
            }
            best
        })
        .sum();

    Ok(VerticalityReport {
        k,
        nonempty: members.len(),
        max_span,
        alpha,
        vertical: max_span <= alpha * sector_width,
        purity: agree as f64 / lc.cloud.len() as f64,
        per_cluster_span,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ScanSpec {
    Flexible { points: usize },
    Sequential { sections: usize, per_section: usize },
}

/// Everything needed to regenerate and re-cluster one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: HelixParams,
    pub scan: ScanSpec,
    pub noise_sigma: f64,
    pub algo: Algo,
    pub features: FeatureSet,
    pub split: SplitMethod,
    /// `fit.seed` is the master seed for every trial.
    pub fit: FitConfig,
}

impl Scenario {
    /// Default geometry, 3600 flexible points, σ = 0.1 mm.
    pub fn standard(algo: Algo, features: FeatureSet, seed: u64) -> Self {
        Self {
            params: HelixParams::default(),
            scan: ScanSpec::Flexible { points: 3600 },
            noise_sigma: 0.1,
            algo,
            features,
            split: match features {
                FeatureSet::Xyz => SplitMethod::None,
                _ => SplitMethod::Model,
            },
            fit: FitConfig::with_seed(seed),
        }
    }

    pub fn scan_seed(&self, trial: usize) -> u64 {
        seed::derive(self.fit.seed, &[seed::tag("trial_scan"), trial as u64])
    }

    pub fn fit_seed(&self, k: usize, trial: usize) -> u64 {
        seed::derive(self.fit.seed, &[seed::tag("trial_fit"), k as u64, trial as u64])
    }

    pub fn generate(&self, trial: usize) -> Result<PointCloud> {
        let s = self.scan_seed(trial);
        match self.scan {
            ScanSpec::Flexible { points } => scan_flexible(&self.params, points, self.noise_sigma, s),
            ScanSpec::Sequential {
                sections,
                per_section,
            } => scan_sequential(&self.params, sections, per_section, self.noise_sigma, s),
        }
    }

    pub fn label(&self, cloud: &PointCloud, k: usize, trial: usize) -> Result<LabeledCloud> {
        let cfg = FitConfig {
            seed: self.fit_seed(k, trial),
            ..self.fit
        };
        cluster(cloud, &self.params, self.algo, self.features, self.split, k, &cfg)
    }

    /// One end-to-end run at level `k`.
    pub fn run_trial(&self, k: usize, trial: usize, alpha: f64) -> Result<VerticalityReport> {
        let cloud = self.generate(trial)?;
        verticality_report(&self.label(&cloud, k, trial)?, alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub vertical: bool,
    pub max_span: Option<f64>,
    pub mean_span: Option<f64>,
    pub nonempty: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdLevel {
    pub k: usize,
    pub pass_fraction: f64,
    pub trials: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub grid: Vec<usize>,
    /// Fraction of vertical trials per grid level.
    pub verdicts: Vec<f64>,
    /// Largest grid level whose pass fraction reaches `rho`, or 0.
    pub threshold: usize,
    /// Smallest grid level whose pass fraction falls below `rho`.
    pub first_fail: Option<usize>,
    pub rho: f64,
    pub alpha: f64,
    pub levels: Vec<ThresholdLevel>,
}

/// Runs `trials` seeded end-to-end trials at every grid level.
///
/// Trial `i` uses the same scanned cloud at every level, so levels differ
/// only in `k` and the fit seed. Pass fractions are reported per level
/// without assuming they fall monotonically with `k`. A trial that errors
/// (e.g. an undersized turn) counts as failed and carries the message.
pub fn threshold_search(
    scenario: &Scenario,
    grid: &[usize],
    trials: usize,
    rho: f64,
    alpha: f64,
) -> Result<ThresholdResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty k grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] == 0 {
        return Err(Error::InvalidArgument(
            "k grid must be strictly ascending and positive".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!("rho must lie in (0, 1], got {rho}")));
    }
    if !(alpha >= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be at least 1, got {alpha}")));
    }

    let clouds: Vec<Result<PointCloud>> = (0..trials).map(|t| scenario.generate(t)).collect();

    let jobs: Vec<(usize, usize)> = grid
        .iter()
        .flat_map(|&k| (0..trials).map(move |t| (k, t)))
        .collect();
    let outcomes: Vec<Mutex<Option<TrialOutcome>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len());

    let run = |k: usize, t: usize| -> TrialOutcome {
        let res = match &clouds[t] {
            Ok(c) => scenario.label(c, k, t).and_then(|lc| verticality_report(&lc, alpha)),
            Err(e) => Err(Error::InvalidArgument(e.to_string())),
        };
        match res {
            Ok(r) => TrialOutcome {
                trial: t,
                vertical: r.vertical,
                max_span: Some(r.max_span),
                mean_span: Some(r.mean_span()),
                nonempty: Some(r.nonempty),
                error: None,
            },
            Err(e) => TrialOutcome {
                trial: t,
                vertical: false,
                max_span: None,
                mean_span: None,
                nonempty: None,
                error: Some(e.to_string()),
            },
        }
    };

    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let j = {
                    let mut n = next.lock().unwrap();
                    let j = *n;
                    *n += 1;
                    j
                };
                let Some(&(k, t)) = jobs.get(j) else { break };
                *outcomes[j].lock().unwrap() = Some(run(k, t));
            });
        }
    });

    let mut outcomes = outcomes
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every job ran"));
    let levels: Vec<ThresholdLevel> = grid
        .iter()
        .map(|&k| {
            let trials: Vec<TrialOutcome> = outcomes.by_ref().take(trials).collect();
            let passes = trials.iter().filter(|o| o.vertical).count();
            ThresholdLevel {
                k,
                pass_fraction: passes as f64 / trials.len() as f64,
                trials,
            }
        })
        .collect();

    let verdicts: Vec<f64> = levels.iter().map(|l| l.pass_fraction).collect();
    let threshold = levels
        .iter()
        .filter(|l| l.pass_fraction >= rho)
        .map(|l| l.k)
        .max()
        .unwrap_or(0);
    let first_fail = levels.iter().find(|l| l.pass_fraction < rho).map(|l| l.k);

    Ok(ThresholdResult {
        grid: grid.to_vec(),
        verdicts,
        threshold,
        first_fail,
        rho,
        alpha,
        levels,
    })
}
