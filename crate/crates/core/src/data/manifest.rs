//! TOML manifest mapping dataset names to files.
//!
//! ```toml
//! [[dataset]]
//! name = "scene"
//! format = "svmlight_multilabel"   # or "csv", or "synthetic"
//! k = 6
//! d = 294
//! train = "scene_train.svm"        # paths are relative to the manifest
//! test = "scene_test.svm"
//! dev = "scene_dev.svm"            # optional: else 25% of train, seeded by split_seed
//! split_seed = 0
//!
//! [[dataset]]
//! name = "table"
//! format = "csv"
//! file = "table.csv"               # one file with a `split` column
//!
//! [[dataset]]
//! name = "synthetic"
//! format = "synthetic"
//! n = 500
//! d = 20
//! k = 5
//! noise = 0.1
//! seed = 1
//! ```

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::{load_multilabel, preprocess, synth_generate, Dataset, Format, LoadOptions, RawDataset, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
pub struct Manifest {
    #[serde(rename = "dataset", default)]
    pub datasets: Vec<DatasetEntry>,
    #[serde(skip)]
    base: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub format: String,
    pub k: Option<usize>,
    pub d: Option<usize>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub file: Option<PathBuf>,
    pub split_seed: Option<u64>,
    pub max_dense_mb: Option<usize>,
    pub n: Option<usize>,
    pub noise: Option<f64>,
    pub seed: Option<u64>,
}

/// Where a manifest entry's samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Synthetic { seed: u64, n: usize, d: usize, k: usize, noise: f64 },
    Files { format: Format, train: PathBuf, dev: Option<PathBuf>, test: PathBuf },
    Single { format: Format, file: PathBuf },
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::File { path: path.to_path_buf(), source })?;
        let mut manifest = Self::parse(&text)?;
        manifest.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let manifest: Manifest = toml::from_str(text)?;
        for entry in &manifest.datasets {
            entry.source()?;
        }
        let mut names: Vec<&str> = manifest.datasets.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Schema(format!("dataset '{}' listed twice", w[0])));
        }
        Ok(manifest)
    }

    pub fn get(&self, name: &str) -> Result<&DatasetEntry> {
        self.datasets
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Schema(format!("dataset '{name}' not in manifest")))
    }

    /// Loads and preprocesses one entry.
    pub fn load_dataset(&self, name: &str) -> Result<Dataset> {
        self.get(name)?.load(&self.base)
    }
}

impl DatasetEntry {
    pub fn source(&self) -> Result<Source> {
        let missing = |field: &str| Error::Schema(format!("dataset '{}': missing '{field}'", self.name));
        if self.format == "synthetic" {
            return Ok(Source::Synthetic {
                seed: self.seed.unwrap_or(0),
                n: self.n.ok_or_else(|| missing("n"))?,
                d: self.d.ok_or_else(|| missing("d"))?,
                k: self.k.ok_or_else(|| missing("k"))?,
                noise: self.noise.unwrap_or(0.0),
            });
        }
        let format: Format = self.format.parse()?;
        match (&self.file, &self.train, &self.test) {
            (Some(file), None, None) if self.dev.is_none() => {
                Ok(Source::Single { format, file: file.clone() })
            }
            (None, Some(train), Some(test)) => Ok(Source::Files {
                format,
                train: train.clone(),
                dev: self.dev.clone(),
                test: test.clone(),
            }),
            _ => Err(Error::Schema(format!(
                "dataset '{}': give either 'file' or both 'train' and 'test'",
                self.name
            ))),
        }
    }

    pub fn load(&self, base: &Path) -> Result<Dataset> {
        let opts = LoadOptions {
            k: self.k,
            d: self.d,
            max_dense_bytes: self
                .max_dense_mb
                .map_or(LoadOptions::default().max_dense_bytes, |mb| mb.saturating_mul(1 << 20)),
        };
        let raw = match self.source()? {
            Source::Synthetic { seed, n, d, k, noise } => {
                let mut data = synth_generate(seed, n, d, k, noise)?;
                data.name = self.name.clone();
                return Ok(data);
            }
            Source::Single { format, file } => load_multilabel(&base.join(file), format, &opts)?,
            Source::Files { format, train, dev, test } => {
                let train = load_multilabel(&base.join(train), format, &opts)?.with_split(Split::Train);
                let test = load_multilabel(&base.join(test), format, &opts)?.with_split(Split::Test);
                match dev {
                    Some(dev) => {
                        let dev = load_multilabel(&base.join(dev), format, &opts)?.with_split(Split::Dev);
                        train.concat(dev)?.concat(test)?
                    }
                    None => carve_dev(train, self.split_seed.unwrap_or(0)).concat(test)?,
                }
            }
        };
        preprocess(&raw, self.name.clone())
    }
}

/// Moves a seeded 25% of the train rows into the dev split.
fn carve_dev(mut raw: RawDataset, seed: u64) -> RawDataset {
    let mut train: Vec<usize> = (0..raw.n()).filter(|&i| raw.assignment[i] == Some(Split::Train)).collect();
    train.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let keep = (train.len() * 3).div_ceil(4);
    for &i in &train[keep..] {
        raw.assignment[i] = Some(Split::Dev);
    }
    raw
}
