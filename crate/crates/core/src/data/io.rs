//! Readers for the two on-disk formats.
//!
//! **svmlight multilabel**: one sample per line,
//! `l1,l2,... idx:val idx:val ...`, labels 0-based, feature indices 1-based
//! and unique within a line. A line whose first token contains `:` has no
//! labels. Blank lines and lines starting with `#` are skipped; anything
//! after a `#` is a comment.
//!
//! **csv**: a header row naming every column. `y_<j>` columns hold label
//! weights for classes `0..k`, `x_<j>` columns hold features `0..d`, and an
//! optional `split` column holds `train`, `dev` or `test`. Column order is
//! free; indices must be contiguous from zero.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{RawDataset, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    SvmlightMultilabel,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svmlight_multilabel" | "svmlight" => Ok(Format::SvmlightMultilabel),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Schema(format!("unknown dataset format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Number of classes; inferred from the largest label when absent.
    pub k: Option<usize>,
    /// Number of features; inferred from the largest index when absent.
    pub d: Option<usize>,
    /// Upper bound on the dense feature matrix, in bytes.
    pub max_dense_bytes: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { k: None, d: None, max_dense_bytes: 4 << 30 }
    }
}

/// One parsed svmlight line: label set and sparse features (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct SvmlightLine {
    pub labels: Vec<usize>,
    pub features: Vec<(usize, f64)>,
}

/// Parses one svmlight multilabel line; `Ok(None)` for blank or comment
/// lines.
pub fn parse_svmlight_line(line: &str, line_no: usize) -> Result<Option<SvmlightLine>> {
    let content = line.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return Ok(None);
    }
    let err = |message: String| Error::Parse { line: line_no, message };
    let mut tokens = content.split_whitespace().peekable();
    let mut labels = Vec::new();
    if let Some(first) = tokens.peek() {
        if !first.contains(':') {
            for part in first.split(',') {
                let label = part
                    .parse::<usize>()
                    .map_err(|_| err(format!("invalid label '{part}'")))?;
                if labels.contains(&label) {
                    return Err(err(format!("duplicate label {label}")));
                }
                labels.push(label);
            }
            tokens.next();
        }
    }
    let mut features = Vec::new();
    let mut seen = HashSet::new();
    for token in tokens {
        let (idx, val) = token
            .split_once(':')
            .ok_or_else(|| err(format!("expected idx:val, got '{token}'")))?;
        let idx: usize = idx.parse().map_err(|_| err(format!("invalid feature index '{idx}'")))?;
        if idx == 0 {
            return Err(err("feature indices are 1-based".into()));
        }
        let val: f64 = val.parse().map_err(|_| err(format!("invalid feature value '{val}'")))?;
        if !val.is_finite() {
            return Err(err(format!("non-finite feature value '{val}'")));
        }
        if !seen.insert(idx) {
            return Err(err(format!("duplicate feature index {idx}")));
        }
        features.push((idx - 1, val));
    }
    Ok(Some(SvmlightLine { labels, features }))
}

pub fn load_multilabel(path: &Path, format: Format, opts: &LoadOptions) -> Result<RawDataset> {
    let file = File::open(path).map_err(|source| Error::File { path: path.to_path_buf(), source })?;
    match format {
        Format::SvmlightMultilabel => load_svmlight(BufReader::new(file), opts),
        Format::Csv => load_csv(file, opts),
    }
}

fn dense_shape(n: usize, d: usize, opts: &LoadOptions) -> Result<()> {
    let bytes = n.saturating_mul(d).saturating_mul(std::mem::size_of::<f64>());
    if bytes > opts.max_dense_bytes {
        return Err(Error::Schema(format!(
            "dense {n}x{d} feature matrix needs {bytes} bytes, above the {} byte cap",
            opts.max_dense_bytes
        )));
    }
    Ok(())
}

pub(crate) fn load_svmlight<R: BufRead>(reader: R, opts: &LoadOptions) -> Result<RawDataset> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        if let Some(row) = parse_svmlight_line(&line?, i + 1)? {
            rows.push((i + 1, row));
        }
    }
    let max_label = rows.iter().flat_map(|(_, r)| r.labels.iter().map(|l| l + 1)).max().unwrap_or(0);
    let max_feature = rows.iter().flat_map(|(_, r)| r.features.iter().map(|f| f.0 + 1)).max().unwrap_or(0);
    let k = opts.k.unwrap_or(max_label);
    let d = opts.d.unwrap_or(max_feature);
    for (line, row) in &rows {
        if let Some(l) = row.labels.iter().find(|l| **l >= k) {
            return Err(Error::Schema(format!("line {line}: label {l} out of range for k = {k}")));
        }
        if let Some((f, _)) = row.features.iter().find(|f| f.0 >= d) {
            return Err(Error::Schema(format!("line {line}: feature {} out of range for d = {d}", f + 1)));
        }
    }
    dense_shape(rows.len(), d, opts)?;
    let mut features = Array2::zeros((rows.len(), d));
    let mut labels = Array2::zeros((rows.len(), k));
    for (i, (_, row)) in rows.iter().enumerate() {
        for &(j, v) in &row.features {
            features[[i, j]] = v;
        }
        for &l in &row.labels {
            labels[[i, l]] = 1.0;
        }
    }
    Ok(RawDataset { features, labels, assignment: vec![None; rows.len()] })
}

enum Column {
    Label(usize),
    Feature(usize),
    Split,
}

fn indexed(prefix: &str, name: &str) -> Option<usize> {
    name.strip_prefix(prefix)?.parse().ok()
}

pub(crate) fn load_csv<R: std::io::Read>(reader: R, opts: &LoadOptions) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut columns = Vec::with_capacity(headers.len());
    for name in headers.iter() {
        let col = if name == "split" {
            Column::Split
        } else if let Some(j) = indexed("y_", name) {
            Column::Label(j)
        } else if let Some(j) = indexed("x_", name) {
            Column::Feature(j)
        } else {
            return Err(Error::Schema(format!("unexpected csv column '{name}'")));
        };
        columns.push(col);
    }
    let contiguous = |pick: &dyn Fn(&Column) -> Option<usize>, what: &str| -> Result<usize> {
        let mut idx: Vec<usize> = columns.iter().filter_map(pick).collect();
        idx.sort_unstable();
        if idx.iter().enumerate().any(|(i, j)| i != *j) {
            return Err(Error::Schema(format!("{what} columns must be numbered 0..n without gaps")));
        }
        Ok(idx.len())
    };
    let k = contiguous(&|c| if let Column::Label(j) = c { Some(*j) } else { None }, "y_")?;
    let d = contiguous(&|c| if let Column::Feature(j) = c { Some(*j) } else { None }, "x_")?;
    if opts.k.is_some_and(|want| want != k) || opts.d.is_some_and(|want| want != d) {
        return Err(Error::Schema(format!("csv has k = {k}, d = {d}; manifest disagrees")));
    }

    let mut feature_rows = Vec::new();
    let mut label_rows = Vec::new();
    let mut assignment = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let line = r + 2;
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; k];
        let mut split = None;
        for (col, field) in columns.iter().zip(record.iter()) {
            let number = || {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse { line, message: format!("invalid number '{field}'") })
            };
            match col {
                Column::Label(j) => y[*j] = number()?,
                Column::Feature(j) => x[*j] = number()?,
                Column::Split => {
                    split = Some(field.parse::<Split>().map_err(|_| Error::Parse {
                        line,
                        message: format!("invalid split '{field}'"),
                    })?)
                }
            }
        }
        feature_rows.extend(x);
        label_rows.extend(y);
        assignment.push(split);
    }
    let n = assignment.len();
    dense_shape(n, d, opts)?;
    Ok(RawDataset {
        features: Array2::from_shape_vec((n, d), feature_rows).expect("row widths fixed"),
        labels: Array2::from_shape_vec((n, k), label_rows).expect("row widths fixed"),
        assignment,
    })
}
