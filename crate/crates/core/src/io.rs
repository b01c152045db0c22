//! Delimited text formats for clouds, matrices and histograms.
//!
//! Cloud files start with a header line `n count`, followed by one point per
//! row: `n` coordinates then an integer label. Matrix files start with
//! `rows cols`. Fields may be separated by commas and/or whitespace; lines
//! starting with `#` are skipped. Floats are written in shortest round-trip
//! form, so save → load is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::models::LabeledCloud;

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_data(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    fn header(&mut self, what: &str) -> Result<(usize, usize)> {
        let (ln, text) = self
            .next_data()
            .ok_or_else(|| self.err(1, format!("missing header line `{what}`")))?;
        let parts: Vec<&str> = fields(text).collect();
        let parse = |s: &str| s.parse::<usize>().ok();
        match parts.as_slice() {
            [a, b] => match (parse(a), parse(b)) {
                (Some(a), Some(b)) => Ok((a, b)),
                _ => Err(self.err(ln, format!("header must be `{what}`, got `{text}`"))),
            },
            _ => Err(self.err(ln, format!("header must be `{what}`, got `{text}`"))),
        }
    }
}

fn parse_float(lines: &Lines, ln: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| lines.err(ln, format!("not a number: `{s}`")))?;
    if !v.is_finite() {
        return Err(lines.err(ln, format!("non-finite value `{s}`")));
    }
    Ok(v)
}

pub fn parse_cloud(path: &Path, text: &str) -> Result<LabeledCloud> {
    let mut lines = Lines {
        path,
        inner: text.lines().enumerate(),
    };
    let (n, count) = lines.header("n count")?;
    let mut data = Vec::with_capacity(n * count);
    let mut labels = Vec::with_capacity(count);
    while let Some((ln, row)) = lines.next_data() {
        let parts: Vec<&str> = fields(row).collect();
        if parts.len() != n + 1 {
            return Err(lines.err(
                ln,
                format!("expected {} fields ({n} coordinates + label), found {}", n + 1, parts.len()),
            ));
        }
        for p in &parts[..n] {
            data.push(parse_float(&lines, ln, p)?);
        }
        let label = parts[n]
            .parse::<i64>()
            .map_err(|_| lines.err(ln, format!("label must be an integer, got `{}`", parts[n])))?;
        labels.push(label);
    }
    if labels.len() != count {
        return Err(lines.err(
            1,
            format!("header declares {count} points but file has {}", labels.len()),
        ));
    }
    let points = Array2::from_shape_vec((count, n), data).expect("shape checked per row");
    LabeledCloud::new(points, labels)
}

pub fn load_cloud(path: &Path) -> Result<LabeledCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(path, &text)
}

pub fn format_cloud(cloud: &LabeledCloud) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", cloud.dim(), cloud.len()).unwrap();
    for (row, label) in cloud.points.axis_iter(Axis(0)).zip(&cloud.labels) {
        for v in row {
            write!(out, "{v:?},").unwrap();
        }
        writeln!(out, "{label}").unwrap();
    }
    out
}

pub fn save_cloud(path: &Path, cloud: &LabeledCloud) -> Result<()> {
    fs::write(path, format_cloud(cloud)).map_err(|e| Error::io(path, e))
}

pub fn parse_matrix(path: &Path, text: &str) -> Result<Array2<f64>> {
    let mut lines = Lines {
        path,
        inner: text.lines().enumerate(),
    };
    let (rows, cols) = lines.header("rows cols")?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    while let Some((ln, row)) = lines.next_data() {
        let parts: Vec<&str> = fields(row).collect();
        if parts.len() != cols {
            return Err(lines.err(ln, format!("expected {cols} fields, found {}", parts.len())));
        }
        for p in parts {
            data.push(parse_float(&lines, ln, p)?);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(lines.err(1, format!("header declares {rows} rows but file has {seen}")));
    }
    Ok(Array2::from_shape_vec((rows, cols), data).expect("shape checked per row"))
}

/// Reads a row-major matrix with header `rows cols` (for dictionaries: `n L`).
pub fn load_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(path, &text)
}

pub fn format_matrix(m: &Array2<f64>) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", m.nrows(), m.ncols()).unwrap();
    for row in m.axis_iter(Axis(0)) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}
