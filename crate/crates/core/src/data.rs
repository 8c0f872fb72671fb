//! Datasets, CSV ingestion, owner splitting, and synthetic covariate-shift
//! instances.
//!
//! Points are plain real vectors. Identity is positional: a point is named by
//! its index in its owner's dataset, never by value, so equal-valued points
//! held by different owners stay distinct and summaries are multisets.

use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng::seeded_rng;
use crate::Result;

/// A single observation in `R^n`. All coordinates are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub coords: Vec<f64>,
}

impl DataPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite coordinate in data point"));
        }
        Ok(DataPoint { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// An ordered multiset of points of common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<DataPoint>,
    pub dim: usize,
}

impl Dataset {
    /// Build a dataset, checking that every point is finite and matches `dim`.
    pub fn new(points: Vec<DataPoint>, dim: usize) -> Result<Self> {
        for p in &points {
            if p.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            if p.coords.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("non-finite coordinate in dataset"));
            }
        }
        Ok(Dataset { points, dim })
    }

    pub fn empty(dim: usize) -> Self {
        Dataset { points: Vec::new(), dim }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: DataPoint) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: p.dim(),
            });
        }
        self.points.push(p);
        Ok(())
    }
}

/// One owner's private slice of the data.
#[derive(Debug, Clone)]
pub struct OwnerSplit {
    /// 1-based owner id.
    pub owner_id: usize,
    pub dataset: Dataset,
}

/// How to partition a dataset among owners.
#[derive(Debug, Clone)]
pub enum SplitSpec {
    /// Fractions of the input per owner; must sum to at most 1. Assignment is
    /// over a seeded shuffle of the point indices, with cumulative rounding
    /// so exact fractions give exact counts.
    Fractions(Vec<f64>),
    /// Explicit, pairwise-disjoint index lists into the input dataset.
    Indices(Vec<Vec<usize>>),
}

/// Load a numeric CSV file: comma-separated, UTF-8, optional single header
/// row. Every cell must parse as a finite 64-bit real; NaN/Inf are rejected.
/// Errors name the offending 1-based file row and column.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut points: Vec<DataPoint> = Vec::new();
    let mut dim: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let row = idx + 1;
        let line = line?;
        if idx == 0 && has_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let expected = *dim.get_or_insert(cells.len());
        if cells.len() != expected {
            return Err(Error::CsvRagged {
                row,
                expected,
                got: cells.len(),
            });
        }
        let mut coords = Vec::with_capacity(cells.len());
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|e| Error::CsvParse {
                row,
                col: j + 1,
                msg: format!("{e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvParse {
                    row,
                    col: j + 1,
                    msg: "non-finite value".into(),
                });
            }
            coords.push(v);
        }
        points.push(DataPoint { coords });
    }

    match dim {
        None => Err(Error::EmptyDataset("csv file has no data rows")),
        Some(n) => Dataset::new(points, n),
    }
}

/// Partition `d` among owners according to `spec`.
///
/// The partition is by point identity (index): owners are pairwise disjoint
/// and, when fractions sum to 1 or indices cover the input, their union is
/// the input. Deterministic given `rng_seed`.
pub fn split_owners(d: &Dataset, spec: &SplitSpec, rng_seed: u64) -> Result<Vec<OwnerSplit>> {
    match spec {
        SplitSpec::Fractions(fracs) => {
            if fracs.is_empty() {
                return Err(Error::invalid("no owners requested"));
            }
            if fracs.iter().any(|f| *f < 0.0 || !f.is_finite()) {
                return Err(Error::invalid("fractions must be non-negative"));
            }
            let total: f64 = fracs.iter().sum();
            if total > 1.0 + 1e-9 {
                return Err(Error::invalid(format!(
                    "fractions sum to {total}, more than 1"
                )));
            }
            let mut idx: Vec<usize> = (0..d.len()).collect();
            let mut rng = seeded_rng(rng_seed);
            // Fisher-Yates
            for i in (1..idx.len()).rev() {
                let j = rng.gen_range(0..=i);
                idx.swap(i, j);
            }
            let n = d.len() as f64;
            let mut owners = Vec::with_capacity(fracs.len());
            let mut cum = 0.0;
            let mut start = 0usize;
            for (k, f) in fracs.iter().enumerate() {
                cum += f;
                let end = (cum * n).round().min(n) as usize;
                let points = idx[start..end]
                    .iter()
                    .map(|&i| d.points[i].clone())
                    .collect();
                owners.push(OwnerSplit {
                    owner_id: k + 1,
                    dataset: Dataset::new(points, d.dim)?,
                });
                start = end;
            }
            Ok(owners)
        }
        SplitSpec::Indices(lists) => {
            let mut seen = vec![false; d.len()];
            let mut owners = Vec::with_capacity(lists.len());
            for (k, list) in lists.iter().enumerate() {
                let mut points = Vec::with_capacity(list.len());
                for &i in list {
                    if i >= d.len() {
                        return Err(Error::invalid(format!("index {i} out of bounds")));
                    }
                    if seen[i] {
                        return Err(Error::invalid(format!("index {i} assigned twice")));
                    }
                    seen[i] = true;
                    points.push(d.points[i].clone());
                }
                owners.push(OwnerSplit {
                    owner_id: k + 1,
                    dataset: Dataset::new(points, d.dim)?,
                });
            }
            Ok(owners)
        }
    }
}

/// Diagonal Gaussian used by the synthetic instance generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    /// Per-coordinate standard deviations; all must be positive.
    pub std: Vec<f64>,
}

impl GaussianSpec {
    fn check(&self, n: usize) -> Result<()> {
        if self.mean.len() != n || self.std.len() != n {
            return Err(Error::DimMismatch {
                expected: n,
                got: self.mean.len().max(self.std.len()),
            });
        }
        if self.std.iter().any(|s| *s <= 0.0 || !s.is_finite()) {
            return Err(Error::invalid("non-positive or non-finite std"));
        }
        Ok(())
    }

    /// Isotropic helper: mean `m` repeated, std `s` repeated.
    pub fn isotropic(n: usize, m: f64, s: f64) -> Self {
        GaussianSpec {
            mean: vec![m; n],
            std: vec![s; n],
        }
    }
}

/// Draw owner datasets and a validation dataset from per-owner diagonal
/// Gaussians. Owner `i` is i.i.d. from its own Gaussian, which is how a
/// covariate shift between sources and the target is staged. Deterministic
/// given `rng_seed`.
pub fn synth_shift(
    n: usize,
    sizes: &[usize],
    owner_params: &[GaussianSpec],
    validation_size: usize,
    validation_params: &GaussianSpec,
    rng_seed: u64,
) -> Result<(Vec<OwnerSplit>, Dataset)> {
    if sizes.len() != owner_params.len() {
        return Err(Error::invalid("sizes and owner params differ in length"));
    }
    for p in owner_params {
        p.check(n)?;
    }
    validation_params.check(n)?;

    let mut rng = seeded_rng(rng_seed);
    let mut draw = |spec: &GaussianSpec, count: usize| -> Dataset {
        let mut points = Vec::with_capacity(count);
        for _ in 0..count {
            let coords = (0..n)
                .map(|j| {
                    let z: f64 = rng.sample(StandardNormal);
                    spec.mean[j] + spec.std[j] * z
                })
                .collect();
            points.push(DataPoint { coords });
        }
        Dataset { points, dim: n }
    };

    let mut owners = Vec::with_capacity(sizes.len());
    for (k, (&count, spec)) in sizes.iter().zip(owner_params).enumerate() {
        owners.push(OwnerSplit {
            owner_id: k + 1,
            dataset: draw(spec, count),
        });
    }
    let validation = draw(validation_params, validation_size);
    Ok((owners, validation))
}

/// Per-feature location/scale computed from one dataset (intended: the
/// validation set, whose statistics the consumer may use freely).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn from_dataset(d: &Dataset) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::EmptyDataset("feature stats of empty dataset"));
        }
        let n = d.dim;
        let m = d.len() as f64;
        let mut mean = vec![0.0; n];
        for p in &d.points {
            for j in 0..n {
                mean[j] += p.coords[j];
            }
        }
        for v in mean.iter_mut() {
            *v /= m;
        }
        let mut var = vec![0.0; n];
        for p in &d.points {
            for j in 0..n {
                let c = p.coords[j] - mean[j];
                var[j] += c * c;
            }
        }
        let std = var.iter().map(|v| (v / m).sqrt()).collect();
        Ok(FeatureStats { mean, std })
    }

    /// Z-score `d` in place. Features with zero spread are left centered
    /// but unscaled.
    pub fn apply(&self, d: &mut Dataset) -> Result<()> {
        if self.mean.len() != d.dim {
            return Err(Error::DimMismatch {
                expected: d.dim,
                got: self.mean.len(),
            });
        }
        for p in &mut d.points {
            for j in 0..d.dim {
                p.coords[j] -= self.mean[j];
                if self.std[j] > 0.0 {
                    p.coords[j] /= self.std[j];
                }
            }
        }
        Ok(())
    }
}
