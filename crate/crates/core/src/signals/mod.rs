//! Signal representation, dataset ingestion, normalization and synthetic data.
//!
//! Frames are flat feature vectors (acceleration + orientation readings from a
//! set of IMU sensors). A "channel" is one feature observed across consecutive
//! frames; channels are what the sparsity analysis operates on.

mod sparsity;
mod synth;

pub use sparsity::{sparsity_report, spectrum, SparsityReport};
pub use synth::{synthesize, SynthConfig};

use std::fmt;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 204;

/// One IMU frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    values: Vec<f64>,
}

impl Signal {
    /// Rejects non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signal frame".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Loaded,
    Synthetic,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// An ordered collection of frames belonging to one split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    frames: Vec<Signal>,
    dim: usize,
    split: Split,
    source: Source,
    /// Rows dropped at ingestion because they contained non-finite values.
    dropped_rows: usize,
    /// Entries clamped into [-1, 1] during normalization (test split only).
    clamped_entries: usize,
}

impl Dataset {
    pub fn from_frames(frames: Vec<Signal>, split: Split, source: Source) -> Result<Self> {
        let dim = frames.first().map(|f| f.dim()).ok_or(Error::NoFrames)?;
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dim() != dim) {
            return Err(Error::MalformedRow {
                row: i,
                expected: dim,
                found: f.dim(),
            });
        }
        Ok(Self {
            frames,
            dim,
            split,
            source,
            dropped_rows: 0,
            clamped_entries: 0,
        })
    }

    pub fn frames(&self) -> &[Signal] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn clamped_entries(&self) -> usize {
        self.clamped_entries
    }

    /// Feature `c` across all frames, in frame order.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.values[c]).collect()
    }

    /// Splits off the first `count` frames into a train set; the remainder
    /// becomes the test set. The two splits are disjoint by construction.
    pub fn split_at(mut self, count: usize) -> Result<(Dataset, Dataset)> {
        if count == 0 || count >= self.frames.len() {
            return Err(Error::InvalidConfig(format!(
                "split point {count} outside dataset of {} frames",
                self.frames.len()
            )));
        }
        let test_frames = self.frames.split_off(count);
        let test = Dataset {
            frames: test_frames,
            dim: self.dim,
            split: Split::Test,
            source: self.source,
            dropped_rows: 0,
            clamped_entries: 0,
        };
        self.split = Split::Train;
        Ok((self, test))
    }

    /// Reads a frame table: UTF-8 text, comma-separated, one frame per row.
    /// Lines starting with `#` are headers/comments. Rows containing any
    /// non-finite value are dropped and counted; rows with the wrong number
    /// of columns are a hard error naming the row.
    pub fn load(path: impl AsRef<Path>, split: Split) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let reader = std::io::BufReader::new(file);

        let mut frames: Vec<Signal> = Vec::new();
        let mut dim: Option<usize> = None;
        let mut dropped = 0usize;
        for (row, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut values = Vec::with_capacity(dim.unwrap_or(DEFAULT_DIM));
            let mut finite = true;
            for (col, field) in trimmed.split(',').enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::BadNumber {
                    row: row + 1,
                    col,
                    text: field.trim().to_string(),
                })?;
                finite &= v.is_finite();
                values.push(v);
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::MalformedRow {
                        row: row + 1,
                        expected: d,
                        found: values.len(),
                    })
                }
                _ => {}
            }
            if finite {
                frames.push(Signal { values });
            } else {
                dropped += 1;
            }
        }
        if frames.is_empty() {
            return Err(Error::NoFrames);
        }
        let mut ds = Dataset::from_frames(frames, split, Source::Loaded)?;
        ds.dropped_rows = dropped;
        Ok(ds)
    }

    /// Writes the frames back out in the same frame-table format.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_frame_table(path, self.frames.iter().map(|f| f.values.as_slice()))
    }
}

/// Writes rows of numbers as a frame table (17 significant digits, enough to
/// round-trip f64 through text).
pub fn write_frame_table<'a>(
    path: &Path,
    rows: impl Iterator<Item = &'a [f64]>,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b",").map_err(io_err)?;
            }
            write!(w, "{v:.17e}").map_err(io_err)?;
            first = false;
        }
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Per-feature min/max fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl NormStats {
    /// Fits per-feature min/max. Errors on a constant feature.
    pub fn fit(train: &Dataset) -> Result<NormStats> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSplit);
        }
        let dim = train.dim();
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for frame in train.frames() {
            for (c, &v) in frame.values().iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        if let Some(c) = (0..dim).find(|&c| max[c] <= min[c]) {
            return Err(Error::ConstantFeature { feature: c });
        }
        Ok(NormStats { min, max })
    }

    /// Affine map of one feature value into [-1, 1] (unclamped).
    pub fn map(&self, feature: usize, v: f64) -> f64 {
        2.0 * (v - self.min[feature]) / (self.max[feature] - self.min[feature]) - 1.0
    }

    pub fn unmap(&self, feature: usize, v: f64) -> f64 {
        (v + 1.0) / 2.0 * (self.max[feature] - self.min[feature]) + self.min[feature]
    }
}

/// Applies train-split normalization. Values outside [-1, 1] (possible on the
/// test split) are clamped and counted on the returned dataset.
pub fn normalize(dataset: &Dataset, stats: &NormStats) -> Dataset {
    let mut clamped = 0usize;
    let frames = dataset
        .frames()
        .iter()
        .map(|f| {
            let values = f
                .values()
                .iter()
                .enumerate()
                .map(|(c, &v)| {
                    let mapped = stats.map(c, v);
                    if !(-1.0..=1.0).contains(&mapped) {
                        clamped += 1;
                        mapped.clamp(-1.0, 1.0)
                    } else {
                        mapped
                    }
                })
                .collect();
            Signal { values }
        })
        .collect();
    Dataset {
        frames,
        dim: dataset.dim(),
        split: dataset.split(),
        source: dataset.source(),
        dropped_rows: dataset.dropped_rows(),
        clamped_entries: clamped,
    }
}

/// Inverse of [`normalize`] (exact on unclamped data).
pub fn denormalize(dataset: &Dataset, stats: &NormStats) -> Dataset {
    let frames = dataset
        .frames()
        .iter()
        .map(|f| Signal {
            values: f
                .values()
                .iter()
                .enumerate()
                .map(|(c, &v)| stats.unmap(c, v))
                .collect(),
        })
        .collect();
    Dataset {
        frames,
        dim: dataset.dim(),
        split: dataset.split(),
        source: dataset.source(),
        dropped_rows: dataset.dropped_rows(),
        clamped_entries: 0,
    }
}

/// Pooled scalar mean / standard deviation over all entries of all frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub mu_x: f64,
    pub sigma_x: f64,
}

/// Population convention (divisor N).
pub fn source_stats(train: &Dataset) -> Result<SourceStats> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }
    let count = (train.len() * train.dim()) as f64;
    let mut sum = 0.0;
    for f in train.frames() {
        for &v in f.values() {
            sum += v;
        }
    }
    let mu = sum / count;
    let mut ss = 0.0;
    for f in train.frames() {
        for &v in f.values() {
            ss += (v - mu) * (v - mu);
        }
    }
    Ok(SourceStats {
        mu_x: mu,
        sigma_x: (ss / count).sqrt(),
    })
}
