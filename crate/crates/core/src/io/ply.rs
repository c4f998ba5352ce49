//! ASCII PLY reader. Only the vertex element's `x`, `y`, `z` are kept;
//! other elements and properties are skipped.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Provenance, SurfacePoint};

struct Element {
    name: String,
    count: usize,
    /// Scalar property names; `None` marks a list property.
    props: Vec<Option<String>>,
}

fn err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line as u64,
        msg: msg.into(),
    }
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(err(path, 1, "missing `ply` magic")),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut ended = false;
    for (ln, line) in lines.by_ref() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(err(path, ln, "only ASCII PLY is supported"));
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| err(path, ln, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| err(path, ln, "element without a valid count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err(path, ln, "property before any element"))?;
                let ty = tok.next().ok_or_else(|| err(path, ln, "property without type"))?;
                if ty == "list" {
                    el.props.push(None);
                } else {
                    let name = tok.next().ok_or_else(|| err(path, ln, "property without name"))?;
                    el.props.push(Some(name.to_string()));
                }
            }
            Some("end_header") => {
                ended = true;
                break;
            }
            Some(other) => return Err(err(path, ln, format!("unexpected header keyword `{other}`"))),
        }
    }
    if !ended {
        return Err(err(path, 0, "missing end_header"));
    }

    let mut points = Vec::new();
    let mut seen_vertex = false;
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let cols = if is_vertex {
            seen_vertex = true;
            let find = |n: &str| {
                el.props
                    .iter()
                    .position(|p| p.as_deref() == Some(n))
                    .ok_or_else(|| err(path, 0, format!("vertex element lacks property `{n}`")))
            };
            if el.props.iter().any(Option::is_none) {
                return Err(err(path, 0, "list properties on vertices are not supported"));
            }
            Some([find("x")?, find("y")?, find("z")?])
        } else {
            None
        };
        for _ in 0..el.count {
            let (ln, line) = lines
                .by_ref()
                .find(|(_, l)| !l.is_empty())
                .ok_or_else(|| err(path, 0, format!("file ends inside element `{}`", el.name)))?;
            let Some(cols) = cols else { continue };
            let vals: Vec<&str> = line.split_whitespace().collect();
            if vals.len() != el.props.len() {
                return Err(err(
                    path,
                    ln,
                    format!("expected {} values, found {}", el.props.len(), vals.len()),
                ));
            }
            let mut xyz = [0.0; 3];
            for (slot, &c) in cols.iter().enumerate() {
                let v: f64 = vals[c]
                    .parse()
                    .map_err(|_| err(path, ln, format!("`{}` is not a number", vals[c])))?;
                if !v.is_finite() {
                    return Err(err(path, ln, format!("non-finite value `{}`", vals[c])));
                }
                xyz[slot] = v;
            }
            points.push(SurfacePoint::new(xyz[0], xyz[1], xyz[2]));
        }
    }
    if !seen_vertex {
        return Err(err(path, 0, "no vertex element"));
    }

    Ok(PointCloud {
        points,
        provenance: Provenance::external(),
    })
}
