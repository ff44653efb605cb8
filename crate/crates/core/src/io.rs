//! Reading and writing `xyz-csv` and ASCII PLY point clouds.
//!
//! CSV: comma-separated rows, optional header line made only of
//! non-numeric names. The first three columns are x, y, z; every further
//! column is an attribute, in file order.
//!
//! PLY: ASCII only. The `vertex` element must carry `x`, `y`, `z`; its other
//! scalar properties become attributes in declaration order. Other elements
//! (faces, edges) are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::cloud::PointCloud;
use crate::error::{file_error, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    XyzCsv,
    AsciiPly,
}

impl CloudFormat {
    /// `.ply` is PLY; everything else is treated as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => CloudFormat::AsciiPly,
            _ => CloudFormat::XyzCsv,
        }
    }
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(file_error(path))?;
    match format {
        CloudFormat::XyzCsv => parse_csv(&text, path),
        CloudFormat::AsciiPly => parse_ply(&text, path),
    }
}

pub fn load_cloud_auto(path: &Path) -> Result<PointCloud> {
    load_cloud(path, CloudFormat::from_path(path))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: PathBuf::from(path),
        line,
        message: message.into(),
    }
}

fn assemble(path: &Path, rows: Vec<Vec<f64>>, width: usize) -> Result<PointCloud> {
    if rows.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = rows.len();
    let coords = DMatrix::from_fn(n, 3, |i, j| rows[i][j]);
    let attrs = DMatrix::from_fn(n, width - 3, |i, j| rows[i][j + 3]);
    PointCloud::new(coords, attrs).map_err(|e| match e {
        Error::NonFinite(what) => parse_error(path, 0, format!("non-finite {what}")),
        other => other,
    })
}

pub fn parse_csv(text: &str, path: &Path) -> Result<PointCloud> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut seen_content = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !seen_content {
            seen_content = true;
            if fields.iter().all(|f| f.parse::<f64>().is_err()) {
                // header
                continue;
            }
        }
        if fields.len() < 3 {
            return Err(parse_error(
                path,
                line_no,
                format!("expected at least 3 columns, found {}", fields.len()),
            ));
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("expected {w} columns, found {}", fields.len()),
                ));
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(fields.len());
        for f in &fields {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_error(path, line_no, format!("non-numeric field {f:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(path, line_no, format!("non-finite field {f:?}")));
            }
            row.push(v);
        }
        rows.push(row);
    }
    assemble(path, rows, width.unwrap_or(3))
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

struct PlyProperty {
    name: String,
    is_list: bool,
}

pub fn parse_ply(text: &str, path: &Path) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_error(path, 1, "missing 'ply' magic")),
    }

    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_done = false;
    for (line_no, line) in lines.by_ref() {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                if tokens.next() != Some("ascii") {
                    return Err(parse_error(path, line_no, "only ASCII PLY is supported"));
                }
            }
            Some("element") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| parse_error(path, line_no, "element without name"))?;
                let count = tokens
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_error(path, line_no, "element without count"))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_error(path, line_no, "property before element"))?;
                let rest: Vec<&str> = tokens.collect();
                let (is_list, name) = match rest.as_slice() {
                    ["list", _, _, name] => (true, *name),
                    [_, name] => (false, *name),
                    _ => return Err(parse_error(path, line_no, "malformed property")),
                };
                element.properties.push(PlyProperty {
                    name: name.to_string(),
                    is_list,
                });
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(other) => {
                return Err(parse_error(path, line_no, format!("unknown header keyword {other:?}")));
            }
        }
    }
    if !header_done {
        return Err(parse_error(path, 0, "missing end_header"));
    }

    let mut rows = Vec::new();
    let mut width = 3;
    for element in &elements {
        if element.name != "vertex" {
            for _ in 0..element.count {
                if lines.next().is_none() {
                    return Err(parse_error(path, 0, format!("truncated {} element", element.name)));
                }
            }
            continue;
        }
        if element.properties.iter().any(|p| p.is_list) {
            return Err(parse_error(path, 0, "list properties on vertices are not supported"));
        }
        let find = |n: &str| element.properties.iter().position(|p| p.name == n);
        let (xi, yi, zi) = match (find("x"), find("y"), find("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(parse_error(path, 0, "vertex element lacks x/y/z properties")),
        };
        let extra: Vec<usize> = (0..element.properties.len())
            .filter(|&i| i != xi && i != yi && i != zi)
            .collect();
        width = 3 + extra.len();
        for _ in 0..element.count {
            let (line_no, line) = lines
                .by_ref()
                .find(|(_, l)| !l.is_empty())
                .ok_or_else(|| parse_error(path, 0, "truncated vertex data"))?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| parse_error(path, line_no, format!("non-numeric field {t:?}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != element.properties.len() {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("expected {} values, found {}", element.properties.len(), values.len()),
                ));
            }
            let mut row = vec![values[xi], values[yi], values[zi]];
            row.extend(extra.iter().map(|&i| values[i]));
            rows.push(row);
        }
    }
    assemble(path, rows, width)
}

fn attr_names(cloud: &PointCloud, names: &[&str]) -> Vec<String> {
    (0..cloud.attr_dim())
        .map(|j| names.get(j).map_or_else(|| format!("attr{j}"), |s| s.to_string()))
        .collect()
}

/// 17 significant digits: enough for every f64 to parse back bit-identically.
fn fmt_value(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

pub fn format_csv(cloud: &PointCloud, names: &[&str]) -> String {
    let mut out = String::from("x,y,z");
    for name in attr_names(cloud, names) {
        out.push(',');
        out.push_str(&name);
    }
    out.push('\n');
    for i in 0..cloud.len() {
        for j in 0..3 {
            if j > 0 {
                out.push(',');
            }
            fmt_value(&mut out, cloud.coords()[(i, j)]);
        }
        for j in 0..cloud.attr_dim() {
            out.push(',');
            fmt_value(&mut out, cloud.attrs()[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn format_ply(cloud: &PointCloud, names: &[&str]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ply\nformat ascii 1.0\nelement vertex {}", cloud.len());
    for axis in ["x", "y", "z"] {
        let _ = writeln!(out, "property double {axis}");
    }
    for name in attr_names(cloud, names) {
        let _ = writeln!(out, "property double {name}");
    }
    out.push_str("end_header\n");
    for i in 0..cloud.len() {
        for j in 0..3 {
            if j > 0 {
                out.push(' ');
            }
            fmt_value(&mut out, cloud.coords()[(i, j)]);
        }
        for j in 0..cloud.attr_dim() {
            out.push(' ');
            fmt_value(&mut out, cloud.attrs()[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn save_cloud(path: &Path, cloud: &PointCloud, format: CloudFormat) -> Result<()> {
    save_cloud_named(path, cloud, format, &[])
}

/// Like [`save_cloud`], naming attribute columns (missing names fall back
/// to `attr<j>`).
pub fn save_cloud_named(path: &Path, cloud: &PointCloud, format: CloudFormat, names: &[&str]) -> Result<()> {
    let text = match format {
        CloudFormat::XyzCsv => format_csv(cloud, names),
        CloudFormat::AsciiPly => format_ply(cloud, names),
    };
    fs::write(path, text).map_err(file_error(path))?;
    Ok(())
}
