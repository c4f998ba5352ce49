//! Elliptical helix tube model and synthetic scans.
//!
//! The centerline is `C(t) = (A cos t, B sin t, pitch * t / 2π)`. The tube
//! cross-section at `t` is an ellipse with semi-axes `tube_a` along the
//! horizontal normal `n1 = C'(t) × e_z` and `tube_b` along `n2 = T × n1`.
//! That frame is singular-free for any positive pitch, unlike a Frenet frame
//! whose normal swings around on an elliptical footprint.

use std::f64::consts::TAU;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Rng};

pub type Vec3 = [f64; 3];

/// Samples per turn of the coarse grid used by [`project_to_centerline`].
pub const PROJECTION_GRID_PER_TURN: usize = 720;
const PROJECTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelixParams {
    /// Footprint semi-axis along X (mm).
    pub footprint_a: f64,
    /// Footprint semi-axis along Y (mm).
    pub footprint_b: f64,
    /// Rise per full turn (mm).
    pub pitch: f64,
    pub turns: f64,
    /// Tube semi-axis along the horizontal normal (mm).
    pub tube_a: f64,
    /// Tube semi-axis along the second normal, roughly vertical (mm).
    pub tube_b: f64,
}

impl Default for HelixParams {
    fn default() -> Self {
        Self {
            footprint_a: 30.0,
            footprint_b: 20.0,
            pitch: 10.0,
            turns: 1.0,
            tube_a: 1.0,
            tube_b: 0.5,
        }
    }
}

impl HelixParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("footprint_a", self.footprint_a),
            ("footprint_b", self.footprint_b),
            ("pitch", self.pitch),
            ("turns", self.turns),
            ("tube_a", self.tube_a),
            ("tube_b", self.tube_b),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(w) = self.separation_warning() {
            log::warn!("{w}");
        }
        Ok(())
    }

    /// Adjacent turns can touch when the tube is taller than half a pitch.
    pub fn separation_warning(&self) -> Option<String> {
        (self.tube_b >= self.pitch / 2.0).then(|| {
            format!(
                "tube_b = {} is not below pitch/2 = {}; turns may not separate cleanly",
                self.tube_b,
                self.pitch / 2.0
            )
        })
    }

    /// Number of (possibly partial) turns, at least one.
    pub fn turn_count(&self) -> usize {
        (self.turns.ceil() as usize).max(1)
    }

    pub fn t_max(&self) -> f64 {
        TAU * self.turns
    }

    fn rise_per_radian(&self) -> f64 {
        self.pitch / TAU
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub turn: u32,
    /// Centerline sweep parameter, radians in `[0, 2π·turns)`.
    pub t: f64,
    /// Cross-section angle, radians in `[0, 2π)`.
    pub phi: f64,
}

impl Truth {
    /// Builds the record with `turn = floor(t / 2π)`.
    pub fn from_sweep(t: f64, phi: f64) -> Self {
        Self {
            turn: (t / TAU).floor().max(0.0) as u32,
            t,
            phi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub truth: Option<Truth>,
}

impl SurfacePoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, truth: None }
    }

    pub fn xyz(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    Sequential,
    Flexible,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mode: ScanMode,
    pub seed: u64,
    pub noise_sigma: f64,
}

impl Provenance {
    pub fn external() -> Self {
        Self {
            mode: ScanMode::External,
            seed: 0,
            noise_sigma: 0.0,
        }
    }
}

/// Ordered point list. Labels produced downstream join back by index.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<SurfacePoint>,
    pub provenance: Provenance,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_truth(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.truth.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub tangent: Vec3,
    pub n1: Vec3,
    pub n2: Vec3,
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: Vec3) -> Vec3 {
    let n = dot(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn dist2(a: Vec3, b: Vec3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    dot(d, d)
}

pub fn centerline(t: f64, p: &HelixParams) -> Vec3 {
    [
        p.footprint_a * t.cos(),
        p.footprint_b * t.sin(),
        p.rise_per_radian() * t,
    ]
}

fn centerline_derivative(t: f64, p: &HelixParams) -> Vec3 {
    [
        -p.footprint_a * t.sin(),
        p.footprint_b * t.cos(),
        p.rise_per_radian(),
    ]
}

pub fn local_frame(t: f64, p: &HelixParams) -> Frame {
    let d = centerline_derivative(t, p);
    let tangent = normalize(d);
    // C' × e_z = (C'y, -C'x, 0): horizontal and pointing away from the axis.
    let n1 = normalize([d[1], -d[0], 0.0]);
    let n2 = normalize(cross(tangent, n1));
    Frame { tangent, n1, n2 }
}

/// Tube surface point at sweep `t` and cross-section angle `phi`, with
/// isotropic Gaussian noise of standard deviation `noise_sigma` per axis.
///
/// Three normal deviates are always drawn so the rng stream does not depend
/// on `noise_sigma`.
pub fn surface_point(
    t: f64,
    phi: f64,
    p: &HelixParams,
    noise_sigma: f64,
    rng: &mut Rng,
) -> SurfacePoint {
    let c = centerline(t, p);
    let f = local_frame(t, p);
    let (u, v) = (p.tube_a * phi.cos(), p.tube_b * phi.sin());
    let mut s = [0.0; 3];
    for i in 0..3 {
        let eps: f64 = StandardNormal.sample(rng);
        s[i] = c[i] + u * f.n1[i] + v * f.n2[i] + noise_sigma * eps;
    }
    SurfacePoint {
        x: s[0],
        y: s[1],
        z: s[2],
        truth: Some(Truth::from_sweep(t, phi)),
    }
}

fn check_noise(noise_sigma: f64) -> Result<()> {
    if noise_sigma.is_finite() && noise_sigma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "noise sigma must be finite and non-negative, got {noise_sigma}"
        )))
    }
}

/// Sequence-depending scan: a constant number of samples on each of
/// `sections_per_turn` cross-sections per turn, emitted section-major.
pub fn scan_sequential(
    p: &HelixParams,
    sections_per_turn: usize,
    points_per_section: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<PointCloud> {
    p.validate()?;
    check_noise(noise_sigma)?;
    if sections_per_turn == 0 || points_per_section == 0 {
        return Err(Error::InvalidArgument(
            "sections per turn and points per section must be positive".into(),
        ));
    }
    let mut rng = seed::child_rng(seed, &[seed::tag("scan_sequential")]);
    let t_max = p.t_max();
    let mut points = Vec::with_capacity(p.turn_count() * sections_per_turn * points_per_section);
    for turn in 0..p.turn_count() {
        for i in 0..sections_per_turn {
            let t = TAU * (turn as f64 + i as f64 / sections_per_turn as f64);
            if t >= t_max {
                break;
            }
            for j in 0..points_per_section {
                let phi = TAU * j as f64 / points_per_section as f64;
                points.push(surface_point(t, phi, p, noise_sigma, &mut rng));
            }
        }
    }
    Ok(PointCloud {
        points,
        provenance: Provenance {
            mode: ScanMode::Sequential,
            seed,
            noise_sigma,
        },
    })
}

/// Flexible (asynchronous) scan: `t` and `phi` drawn uniformly, so the number
/// of samples near any cross-section is random. Sampling is uniform in `t`,
/// not in arc length.
pub fn scan_flexible(
    p: &HelixParams,
    n_points: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<PointCloud> {
    p.validate()?;
    check_noise(noise_sigma)?;
    if n_points == 0 {
        return Err(Error::InvalidArgument("point count must be positive".into()));
    }
    let mut rng = seed::child_rng(seed, &[seed::tag("scan_flexible")]);
    let t_max = p.t_max();
    let points = (0..n_points)
        .map(|_| {
            let t = rng.gen_range(0.0..t_max);
            let phi = rng.gen_range(0.0..TAU);
            surface_point(t, phi, p, noise_sigma, &mut rng)
        })
        .collect();
    Ok(PointCloud {
        points,
        provenance: Provenance {
            mode: ScanMode::Flexible,
            seed,
            noise_sigma,
        },
    })
}

/// Sweep parameter of the centerline point nearest to `q`, over
/// `[0, 2π·turns]`.
///
/// A grid scan picks the best sample (first one wins on ties, i.e. the
/// smaller `t`), then ternary search refines within the neighbouring grid
/// cells.
pub fn project_to_centerline(q: Vec3, p: &HelixParams) -> f64 {
    let t_max = p.t_max();
    let samples = ((PROJECTION_GRID_PER_TURN as f64 * p.turns).ceil() as usize).max(2);
    let step = t_max / samples as f64;
    let f = |t: f64| dist2(q, centerline(t, p));

    let mut best_i = 0;
    let mut best = f(0.0);
    for i in 1..=samples {
        let d = f(i as f64 * step);
        if d < best {
            best = d;
            best_i = i;
        }
    }

    let mut lo = (best_i.saturating_sub(1)) as f64 * step;
    let mut hi = ((best_i + 1).min(samples)) as f64 * step;
    while hi - lo > PROJECTION_TOL {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t = 0.5 * (lo + hi);
    // Never return something worse than the grid sample itself.
    let grid_t = best_i as f64 * step;
    if f(t) <= best {
        t
    } else {
        grid_t
    }
}
