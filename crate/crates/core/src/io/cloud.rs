use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{CloudFile, ReadOptions};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Provenance, SurfacePoint, Truth};
use crate::pipeline::LabeledCloud;

const TRUTH_COLUMNS: [&str; 3] = ["turn", "t", "phi"];

struct Layout {
    truth: bool,
    label: bool,
}

fn parse_header(cols: &[&str]) -> Option<Layout> {
    if cols.len() < 3 || cols[..3] != ["x", "y", "z"] {
        return None;
    }
    let rest = &cols[3..];
    match rest {
        [] => Some(Layout { truth: false, label: false }),
        ["label"] => Some(Layout { truth: false, label: true }),
        [a, b, c] if [*a, *b, *c] == TRUTH_COLUMNS => Some(Layout { truth: true, label: false }),
        [a, b, c, "label"] if [*a, *b, *c] == TRUTH_COLUMNS => Some(Layout { truth: true, label: true }),
        _ => None,
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn position_line(e: &csv::Error) -> u64 {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { pos: Some(p), .. } => p.line(),
        csv::ErrorKind::Utf8 { pos: Some(p), .. } => p.line(),
        csv::ErrorKind::Deserialize { pos: Some(p), .. } => p.line(),
        _ => 0,
    }
}

pub fn read_csv(path: &Path, opts: ReadOptions) -> Result<CloudFile> {
    let file = File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let layout = parse_header(&cols).ok_or_else(|| {
        parse_err(
            path,
            1,
            format!("expected header x,y,z[,turn,t,phi][,label], got `{}`", cols.join(",")),
        )
    })?;

    let mut points = Vec::new();
    let mut labels = layout.label.then(Vec::new);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = position_line(&e);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let float = |i: usize, name: &str| -> Result<f64> {
            let s = &rec[i];
            let v: f64 = s
                .parse()
                .map_err(|_| parse_err(path, line, format!("{name}: `{s}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("{name}: non-finite value `{s}`")));
            }
            Ok(v)
        };
        let mut p = SurfacePoint::new(float(0, "x")?, float(1, "y")?, float(2, "z")?);
        if layout.truth {
            let s = &rec[3];
            let turn: u32 = s
                .parse()
                .map_err(|_| parse_err(path, line, format!("turn: `{s}` is not a non-negative integer")))?;
            let (mut t, mut phi) = (float(4, "t")?, float(5, "phi")?);
            if opts.degrees {
                t = t.to_radians();
                phi = phi.to_radians();
            }
            if (t / TAU).floor() != turn as f64 {
                return Err(parse_err(
                    path,
                    line,
                    format!("turn {turn} inconsistent with t = {t} rad"),
                ));
            }
            p.truth = Some(Truth { turn, t, phi });
        }
        if let Some(labels) = labels.as_mut() {
            let s = &rec[rec.len() - 1];
            let l: usize = s
                .parse()
                .map_err(|_| parse_err(path, line, format!("label: `{s}` is not a non-negative integer")))?;
            labels.push(l);
        }
        points.push(p);
    }

    Ok(CloudFile {
        cloud: PointCloud {
            points,
            provenance: Provenance::external(),
        },
        labels,
    })
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows(path: &Path, cloud: &PointCloud, labels: Option<&[usize]>) -> Result<()> {
    let truth = cloud.has_truth();
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = String::from("x,y,z");
    if truth {
        header.push_str(",turn,t,phi");
    }
    if labels.is_some() {
        header.push_str(",label");
    }
    writeln!(w, "{header}")?;
    for (i, p) in cloud.points.iter().enumerate() {
        let mut row = format!("{},{},{}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z));
        if truth {
            let tr = p.truth.expect("checked by has_truth");
            row.push_str(&format!(",{},{},{}", tr.turn, fmt_f64(tr.t), fmt_f64(tr.phi)));
        }
        if let Some(l) = labels {
            row.push_str(&format!(",{}", l[i]));
        }
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes an unlabeled cloud. Truth columns are emitted when every point
/// has them.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_rows(path, cloud, None)
}

pub fn write_labeled(path: &Path, lc: &LabeledCloud) -> Result<()> {
    if lc.labels.len() != lc.cloud.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} points",
            lc.labels.len(),
            lc.cloud.len()
        )));
    }
    write_rows(path, &lc.cloud, Some(&lc.labels))
}

/// `x,y,z,label` rows for external plotting.
pub fn write_plot(path: &Path, cloud: &PointCloud, labels: &[usize]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x,y,z,label")?;
    for (p, l) in cloud.points.iter().zip(labels) {
        writeln!(w, "{},{},{},{l}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z))?;
    }
    w.flush()?;
    Ok(())
}
