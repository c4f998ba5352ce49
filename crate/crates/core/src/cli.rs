//! `vclust` command-line interface.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data or contract
//! errors. Messages go to standard error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{scan_flexible, scan_sequential, HelixParams};
use crate::io::report::{ClusterSummary, InputDigest, RunReport};
use crate::io::{self, CloudFormat, ReadOptions};
use crate::pipeline::{self, Algo, FeatureSet, FitConfig, LabeledCloud, Method, SomTopologyKind, SplitMethod};
use crate::verticality::{self, threshold_search, verticality_report, Scenario, ScanSpec};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "vclust", version, about = "Vertical clustering of elliptical helical point clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a scanned helix tube.
    Generate(GenerateArgs),
    /// Cluster a cloud (baseline 3D or turn-wise 2D) and write labels.
    Cluster(ClusterArgs),
    /// Label a sequential scan by index, one label per cross-section.
    SequenceLabel(SequenceLabelArgs),
    /// Verticality report for a labeled cloud with ground truth.
    Evaluate(EvaluateArgs),
    /// Search for the largest cluster count that stays vertical.
    Threshold(ThresholdArgs),
    /// Write `x,y,z,label` rows for external plotting.
    ExportPlot(ExportPlotArgs),
    /// Re-run the command recorded in a report.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GenMode {
    Sequential,
    Flexible,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GeometryArgs {
    /// Footprint semi-axis along X (mm).
    #[arg(long = "a", default_value_t = 30.0)]
    pub a: f64,
    /// Footprint semi-axis along Y (mm).
    #[arg(long = "b", default_value_t = 20.0)]
    pub b: f64,
    #[arg(long, default_value_t = 10.0)]
    pub pitch: f64,
    #[arg(long, default_value_t = 1.0)]
    pub turns: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tube_a: f64,
    #[arg(long, default_value_t = 0.5)]
    pub tube_b: f64,
}

impl GeometryArgs {
    pub fn params(&self) -> HelixParams {
        HelixParams {
            footprint_a: self.a,
            footprint_b: self.b,
            pitch: self.pitch,
            turns: self.turns,
            tube_a: self.tube_a,
            tube_b: self.tube_b,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// PAM restarts.
    #[arg(long, default_value_t = 5, value_parser = positive)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_swap_iters: usize,
    /// SOM lattice; ring for xy and grid for xyz when unset.
    #[arg(long, value_enum)]
    pub topology: Option<SomTopologyKind>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr0: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lr_final: f64,
    #[arg(long)]
    pub radius0: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub radius_final: f64,
}

impl FitArgs {
    fn config(&self, seed: u64) -> FitConfig {
        FitConfig {
            restarts: self.restarts,
            max_swap_iters: self.max_swap_iters,
            som_topology: self.topology,
            epochs: self.epochs,
            lr0: self.lr0,
            lr_final: self.lr_final,
            radius0: self.radius0,
            radius_final: self.radius_final,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub mode: GenMode,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Cross-sections per turn (sequential).
    #[arg(long, value_parser = positive)]
    pub sections: Option<usize>,
    /// Samples per cross-section (sequential).
    #[arg(long, value_parser = positive)]
    pub per_section: Option<usize>,
    /// Total samples (flexible).
    #[arg(long, value_parser = positive)]
    pub points: Option<usize>,
    /// Gaussian noise sigma per axis (mm).
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReadArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Input format; inferred from the extension when unset.
    #[arg(long, value_enum)]
    pub format: Option<CloudFormat>,
    /// Input `t` and `phi` columns are in degrees.
    #[arg(long)]
    pub degrees: bool,
}

impl ReadArgs {
    fn read(&self) -> CliResult<io::CloudFile> {
        let format = self.format.unwrap_or_else(|| CloudFormat::from_path(&self.input));
        Ok(io::read_cloud_file(
            &self.input,
            format,
            ReadOptions {
                degrees: self.degrees,
            },
        )?)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ClusterArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    #[arg(long, value_enum, default_value_t = FeatureSet::Xy)]
    pub features: FeatureSet,
    #[arg(long, value_parser = positive)]
    pub k: usize,
    /// Turn split; `model` for xy and `none` for xyz when unset.
    #[arg(long, value_enum)]
    pub split: Option<SplitMethod>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = verticality::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[command(flatten)]
    pub read: ReadArgs,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SequenceLabelArgs {
    #[arg(long, value_parser = positive)]
    pub per_section: usize,
    #[command(flatten)]
    pub read: ReadArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long, default_value_t = verticality::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Clusters per turn; inferred from the labels when unset.
    #[arg(long, value_parser = positive)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub read: ReadArgs,
    #[arg(long)]
    #[serde(skip)]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ThresholdArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    #[arg(long, value_enum, default_value_t = FeatureSet::Xy)]
    pub features: FeatureSet,
    #[arg(long, value_parser = positive, default_value_t = 5)]
    pub k_min: usize,
    #[arg(long, value_parser = positive, default_value_t = 72)]
    pub k_max: usize,
    #[arg(long, value_parser = positive, default_value_t = 5)]
    pub step: usize,
    /// Explicit comma-separated k list; overrides --k-min/--k-max/--step.
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    pub grid: Option<Vec<usize>>,
    #[arg(long, value_parser = positive, default_value_t = verticality::DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = verticality::DEFAULT_RHO)]
    pub rho: f64,
    #[arg(long, default_value_t = verticality::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub split: Option<SplitMethod>,
    #[arg(long, value_enum, default_value_t = GenMode::Flexible)]
    pub mode: GenMode,
    #[arg(long, value_parser = positive, default_value_t = 3600)]
    pub points: usize,
    #[arg(long, value_parser = positive, default_value_t = 72)]
    pub sections: usize,
    #[arg(long, value_parser = positive, default_value_t = 50)]
    pub per_section: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    #[serde(skip)]
    pub report: PathBuf,
}

impl ThresholdArgs {
    pub fn k_grid(&self) -> CliResult<Vec<usize>> {
        if let Some(g) = &self.grid {
            if g.is_empty() || g.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::Usage("--grid must be strictly ascending".into()));
            }
            return Ok(g.clone());
        }
        if self.k_min > self.k_max {
            return Err(CliError::Usage("--k-min exceeds --k-max".into()));
        }
        let mut g: Vec<usize> = (self.k_min..=self.k_max).step_by(self.step).collect();
        if g.last() != Some(&self.k_max) {
            g.push(self.k_max);
        }
        Ok(g)
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            params: self.geometry.params(),
            scan: match self.mode {
                GenMode::Flexible => ScanSpec::Flexible {
                    points: self.points,
                },
                GenMode::Sequential => ScanSpec::Sequential {
                    sections: self.sections,
                    per_section: self.per_section,
                },
            },
            noise_sigma: self.noise,
            algo: self.algo,
            features: self.features,
            split: self.split.unwrap_or(default_split(self.features)),
            fit: self.fit.config(self.seed),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExportPlotArgs {
    #[command(flatten)]
    pub read: ReadArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Report written by `cluster`, `evaluate` or `threshold`.
    #[arg(long)]
    pub report: PathBuf,
    /// Where to write the re-run's report.
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the labeled cloud when replaying `cluster`.
    #[arg(long)]
    pub cloud_out: Option<PathBuf>,
}

fn default_split(features: FeatureSet) -> SplitMethod {
    match features {
        FeatureSet::Xyz => SplitMethod::None,
        _ => SplitMethod::Model,
    }
}

fn scenario_json<T: Serialize>(args: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(args).map_err(|e| CliError::Data(e.into()))
}

fn finish(mut report: RunReport, start: Instant, path: &Path) -> CliResult<()> {
    report.timing.seconds = start.elapsed().as_secs_f64();
    report.write(path)?;
    Ok(())
}

fn generate(args: &GenerateArgs) -> CliResult<()> {
    let p = args.geometry.params();
    let cloud = match args.mode {
        GenMode::Sequential => {
            if args.points.is_some() {
                return Err(CliError::Usage("--points applies to flexible mode only".into()));
            }
            scan_sequential(
                &p,
                args.sections.unwrap_or(72),
                args.per_section.unwrap_or(50),
                args.noise,
                args.seed,
            )?
        }
        GenMode::Flexible => {
            if args.sections.is_some() || args.per_section.is_some() {
                return Err(CliError::Usage(
                    "--sections/--per-section apply to sequential mode only".into(),
                ));
            }
            scan_flexible(&p, args.points.unwrap_or(3600), args.noise, args.seed)?
        }
    };
    io::write_cloud(&args.out, &cloud)?;
    Ok(())
}

fn cluster(args: &ClusterArgs, out: Option<&Path>, report_path: Option<&Path>) -> CliResult<()> {
    let start = Instant::now();
    let file = args.read.read()?;
    let split = args.split.unwrap_or(default_split(args.features));
    let cfg = args.fit.config(args.seed);
    let lc = pipeline::cluster(
        &file.cloud,
        &args.geometry.params(),
        args.algo,
        args.features,
        split,
        args.k,
        &cfg,
    )?;
    if let Some(out) = out {
        io::write_labeled(out, &lc)?;
    }
    if let Some(path) = report_path {
        let mut report = RunReport::new("cluster", scenario_json(args)?);
        report.input = Some(InputDigest::of(&args.read.input)?);
        report.cluster = Some(ClusterSummary::of(&lc));
        if lc.cloud.has_truth() {
            report.verticality = Some(verticality_report(&lc, args.alpha)?);
        }
        finish(report, start, path)?;
    }
    Ok(())
}

fn sequence_label(args: &SequenceLabelArgs) -> CliResult<()> {
    let file = args.read.read()?;
    let lc = pipeline::sequence_label(&file.cloud, args.per_section)?;
    io::write_labeled(&args.out, &lc)?;
    Ok(())
}

/// Clusters per turn for a labeled file: `ceil((max_label + 1) / turns)`.
fn infer_k(labels: &[usize], turns: usize) -> usize {
    let top = labels.iter().max().map_or(0, |m| m + 1);
    top.div_ceil(turns.max(1)).max(1)
}

fn labeled_from_file(file: io::CloudFile, k: Option<usize>) -> CliResult<LabeledCloud> {
    let labels = file.labels.ok_or_else(|| {
        CliError::Data(Error::Format("input has no `label` column".into()))
    })?;
    let turns = file
        .cloud
        .points
        .iter()
        .filter_map(|p| p.truth.map(|t| t.turn))
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let k_per_turn = k.unwrap_or_else(|| infer_k(&labels, turns));
    Ok(LabeledCloud {
        cloud: file.cloud,
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

fn evaluate(args: &EvaluateArgs, report_path: &Path) -> CliResult<()> {
    let start = Instant::now();
    let file = args.read.read()?;
    let lc = labeled_from_file(file, args.k)?;
    let mut report = RunReport::new("evaluate", scenario_json(args)?);
    report.input = Some(InputDigest::of(&args.read.input)?);
    report.verticality = Some(verticality_report(&lc, args.alpha)?);
    finish(report, start, report_path)
}

fn threshold(args: &ThresholdArgs, report_path: &Path) -> CliResult<()> {
    let start = Instant::now();
    let grid = args.k_grid()?;
    let result = threshold_search(&args.scenario(), &grid, args.trials, args.rho, args.alpha)?;
    let mut report = RunReport::new("threshold", scenario_json(args)?);
    report.threshold = Some(result);
    finish(report, start, report_path)
}

fn export_plot(args: &ExportPlotArgs) -> CliResult<()> {
    let file = args.read.read()?;
    let labels = file
        .labels
        .ok_or_else(|| CliError::Data(Error::Format("input has no `label` column".into())))?;
    io::write_plot(&args.out, &file.cloud, &labels)?;
    Ok(())
}

fn replay(args: &ReplayArgs) -> CliResult<()> {
    let old = RunReport::read(&args.report)?;
    let bad = |e: serde_json::Error| CliError::Data(Error::Json(e));
    match old.command.as_str() {
        "cluster" => {
            let a: ClusterArgs = serde_json::from_value(old.scenario).map_err(bad)?;
            cluster(&a, args.cloud_out.as_deref(), Some(&args.out))
        }
        "evaluate" => {
            let a: EvaluateArgs = serde_json::from_value(old.scenario).map_err(bad)?;
            evaluate(&a, &args.out)
        }
        "threshold" => {
            let a: ThresholdArgs = serde_json::from_value(old.scenario).map_err(bad)?;
            threshold(&a, &args.out)
        }
        other => Err(CliError::Data(Error::Format(format!(
            "cannot replay a `{other}` report"
        )))),
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Cluster(a) => cluster(a, Some(&a.out), a.report.as_deref()),
        Command::SequenceLabel(a) => sequence_label(a),
        Command::Evaluate(a) => evaluate(a, &a.report),
        Command::Threshold(a) => threshold(a, &a.report),
        Command::ExportPlot(a) => export_plot(a),
        Command::Replay(a) => replay(a),
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
