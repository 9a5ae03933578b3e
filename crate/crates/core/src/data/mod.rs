//! Multi-label datasets for label-proportion estimation.
//!
//! Raw files hold binary (or nonnegative) label indicators; [`preprocess`]
//! drops unlabeled samples, standardizes features with train-split
//! statistics and scales every label row onto the simplex.

mod io;
mod manifest;
mod synth;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::ProbVector;

pub use io::{load_multilabel, parse_svmlight_line, Format, LoadOptions, SvmlightLine};
pub use manifest::{DatasetEntry, Manifest, Source};
pub use synth::{synth_generate, synth_generate_with_truth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Schema(format!("unknown split '{s}'")))
    }
}

/// Disjoint index sets into a dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    fn from_assignment(assignment: &[Split]) -> Self {
        let mut splits = Splits::default();
        for (i, s) in assignment.iter().enumerate() {
            match s {
                Split::Train => splits.train.push(i),
                Split::Dev => splits.dev.push(i),
                Split::Test => splits.test.push(i),
            }
        }
        splits
    }
}

/// Features before preprocessing, with raw label weights and a split per
/// row (`None` when the source file carries no split information).
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub features: Array2<f64>,
    pub labels: Array2<f64>,
    pub assignment: Vec<Option<Split>>,
}

impl RawDataset {
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    /// Rows of `other` appended below `self`.
    pub fn concat(mut self, other: RawDataset) -> Result<RawDataset> {
        if self.n() == 0 {
            return Ok(other);
        }
        if other.n() == 0 {
            return Ok(self);
        }
        if self.features.ncols() != other.features.ncols() || self.labels.ncols() != other.labels.ncols() {
            return Err(Error::Schema(format!(
                "cannot concatenate {}x{} / {} labels with {}x{} / {} labels",
                self.n(),
                self.features.ncols(),
                self.labels.ncols(),
                other.n(),
                other.features.ncols(),
                other.labels.ncols()
            )));
        }
        self.features.append(Axis(0), other.features.view()).expect("column counts checked");
        self.labels.append(Axis(0), other.labels.view()).expect("column counts checked");
        self.assignment.extend(other.assignment);
        Ok(self)
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.assignment = vec![Some(split); self.n()];
        self
    }
}

/// A preprocessed dataset: standardized features, simplex labels, splits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    features: Array2<f64>,
    labels: Vec<ProbVector>,
    splits: Splits,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<ProbVector>,
        splits: Splits,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::Schema(format!("{} label rows for {n} samples", labels.len())));
        }
        if let Some(first) = labels.first() {
            if let Some(bad) = labels.iter().find(|l| l.len() != first.len()) {
                return Err(Error::Schema(format!(
                    "label rows of width {} and {}",
                    first.len(),
                    bad.len()
                )));
            }
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema("non-finite feature value".into()));
        }
        let mut seen = vec![false; n];
        for split in Split::ALL {
            for &i in splits.get(split) {
                if i >= n {
                    return Err(Error::Schema(format!("{split} index {i} out of range for n = {n}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Schema(format!("sample {i} appears in more than one split")));
                }
            }
        }
        Ok(Dataset { name: name.into(), features, labels, splits })
    }

    /// Every sample in the train split.
    pub fn single_split(name: impl Into<String>, features: Array2<f64>, labels: Vec<ProbVector>) -> Result<Self> {
        let splits = Splits { train: (0..features.nrows()).collect(), ..Splits::default() };
        Self::new(name, features, labels, splits)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn k(&self) -> usize {
        self.labels.first().map_or(0, |l| l.len())
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[ProbVector] {
        &self.labels
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn view(&self, split: Split) -> SplitView<'_> {
        SplitView { data: self, indices: Cow::Borrowed(self.splits.get(split)) }
    }

    /// All samples, in storage order.
    pub fn all(&self) -> SplitView<'_> {
        SplitView { data: self, indices: Cow::Owned((0..self.n()).collect()) }
    }

    /// Back to raw form, so preprocessing can be re-applied.
    pub fn to_raw(&self) -> RawDataset {
        let mut labels = Array2::zeros((self.n(), self.k()));
        for (mut row, y) in labels.rows_mut().into_iter().zip(&self.labels) {
            row.assign(&ArrayView1::from(y.as_slice()));
        }
        let mut assignment = vec![None; self.n()];
        for split in Split::ALL {
            for &i in self.splits.get(split) {
                assignment[i] = Some(split);
            }
        }
        RawDataset { features: self.features.clone(), labels, assignment }
    }
}

/// A subset of samples from a [`Dataset`].
#[derive(Debug, Clone)]
pub struct SplitView<'a> {
    data: &'a Dataset,
    indices: Cow<'a, [usize]>,
}

impl<'a> SplitView<'a> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.data
    }

    pub fn x(&self, pos: usize) -> ArrayView1<'a, f64> {
        self.data.features.row(self.indices[pos])
    }

    pub fn y(&self, pos: usize) -> &'a ProbVector {
        &self.data.labels[self.indices[pos]]
    }
}

/// Drops unlabeled samples, standardizes features with train-split mean and
/// population standard deviation (zero-variance features are only
/// centered) and scales each label row to sum to one.
pub fn preprocess(raw: &RawDataset, name: impl Into<String>) -> Result<Dataset> {
    let n = raw.n();
    if raw.labels.nrows() != n || raw.assignment.len() != n {
        return Err(Error::Schema("raw dataset rows are inconsistent".into()));
    }
    let mut keep = Vec::with_capacity(n);
    for i in 0..n {
        let row = raw.labels.row(i);
        if let Some(bad) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Schema(format!("sample {i} has invalid label weight {bad}")));
        }
        if row.sum() > 0.0 {
            let split = raw.assignment[i]
                .ok_or_else(|| Error::Schema(format!("sample {i} has no split assignment")))?;
            keep.push((i, split));
        }
    }
    let train: Vec<usize> = keep.iter().filter(|(_, s)| *s == Split::Train).map(|(i, _)| *i).collect();
    if train.is_empty() {
        return Err(Error::Schema("train split is empty after removing unlabeled samples".into()));
    }

    let d = raw.features.ncols();
    let train_x = raw.features.select(Axis(0), &train);
    let mean = train_x.mean_axis(Axis(0)).expect("nonempty train split");
    let std = train_x.std_axis(Axis(0), 0.0);

    let rows: Vec<usize> = keep.iter().map(|(i, _)| *i).collect();
    let mut features = raw.features.select(Axis(0), &rows);
    for j in 0..d {
        let (m, s) = (mean[j], std[j]);
        features.column_mut(j).mapv_inplace(|v| if s > 0.0 { (v - m) / s } else { v - m });
    }

    let labels = rows
        .iter()
        .map(|&i| {
            let row = raw.labels.row(i);
            let sum = row.sum();
            if (sum - 1.0).abs() <= 1e-12 {
                ProbVector::new(row.to_vec())
            } else {
                ProbVector::normalized(row.as_slice().expect("standard layout"))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let assignment: Vec<Split> = keep.iter().map(|(_, s)| *s).collect();
    Dataset::new(name, features, labels, Splits::from_assignment(&assignment))
}
