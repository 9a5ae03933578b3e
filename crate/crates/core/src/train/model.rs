//! Plain-text model files: a header line `k d loss lambda seed` followed by
//! `k` rows of `d` space-separated reals. Floats use the shortest
//! round-trip representation, so writing the same model twice yields
//! identical bytes and reading it back is lossless.

use std::fmt::Write as _;

use ndarray::Array2;

use super::WeightMatrix;
use crate::error::{Error, Result};
use crate::losses::LossSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelHeader {
    pub loss: LossSpec,
    pub lambda: f64,
    pub seed: u64,
}

pub fn write_model(w: &WeightMatrix, header: &ModelHeader) -> String {
    let mut out = String::new();
    writeln!(out, "{} {} {} {} {}", w.k(), w.d(), header.loss, header.lambda, header.seed).unwrap();
    for row in w.array().rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

pub fn read_model(text: &str) -> Result<(ModelHeader, WeightMatrix)> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| Error::Parse { line: 1, message: "empty model file".into() })?;
    let fields: Vec<&str> = head.split_whitespace().collect();
    let bad = |message: String| Error::Parse { line: 1, message };
    if fields.len() != 5 {
        return Err(bad(format!("expected 'k d loss lambda seed', got '{head}'")));
    }
    let k: usize = fields[0].parse().map_err(|_| bad(format!("invalid k '{}'", fields[0])))?;
    let d: usize = fields[1].parse().map_err(|_| bad(format!("invalid d '{}'", fields[1])))?;
    let loss: LossSpec = fields[2].parse().map_err(|e: Error| bad(e.to_string()))?;
    let lambda: f64 = fields[3].parse().map_err(|_| bad(format!("invalid lambda '{}'", fields[3])))?;
    let seed: u64 = fields[4].parse().map_err(|_| bad(format!("invalid seed '{}'", fields[4])))?;

    let mut entries = Vec::with_capacity(k * d);
    for (i, line) in lines.by_ref().take(k) {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse { line: i + 1, message: "invalid weight".into() })?;
        if row.len() != d {
            return Err(Error::Parse { line: i + 1, message: format!("expected {d} weights, got {}", row.len()) });
        }
        entries.extend(row);
    }
    if entries.len() != k * d {
        return Err(Error::Schema(format!("model file holds fewer than {k} weight rows")));
    }
    if let Some((i, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::Parse { line: i + 1, message: format!("unexpected trailing content '{extra}'") });
    }
    let w = WeightMatrix::from_array(Array2::from_shape_vec((k, d), entries).expect("length checked"))?;
    Ok((ModelHeader { loss, lambda, seed }, w))
}
