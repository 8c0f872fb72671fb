//! The shared random-feature hash.
//!
//! A basis of `d` frequency rows `omega_i ~ N(0, 2*gamma*I_n)` and offsets
//! `b_i ~ Uniform[0, 2pi)` is sampled exactly once per protocol run and
//! shared by value between the aggregator and every owner. The hash of a
//! point is
//!
//! ```text
//! h(x)[i] = sqrt(2/d) * cos(omega_i . x + b_i)
//! ```
//!
//! so inner products of hashes estimate the RBF kernel:
//! `<h(x), h(y)> ~ k(x, y)`, within `eps` except with probability
//! `exp(-d eps^2 / 4)` per pair.
//!
//! Sampling uses ChaCha12 plus the ziggurat standard-normal transform from
//! `rand_distr`, in a fixed draw order (all frequency rows first, then all
//! offsets), so a basis is reproducible cross-platform from
//! `(seed, gamma, d, n)` alone. That quadruple is the serialized form:
//! bases are shipped as a [`BasisSpec`] and regenerated, never as matrices.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{DataPoint, Dataset};
use crate::error::Error;
use crate::kernel::KahanSum;
use crate::rng::seeded_rng;
use crate::Result;

/// The serialized identity of a basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub seed: u64,
    pub gamma: f64,
    pub d: usize,
    pub n: usize,
}

/// A sampled hash basis. Immutable after construction.
#[derive(Debug, Clone)]
pub struct RffBasis {
    /// `d` rows of length `n`.
    omegas: Vec<Vec<f64>>,
    /// `d` offsets in `[0, 2pi)`.
    offsets: Vec<f64>,
    spec: BasisSpec,
    scale: f64,
}

/// A hashed point: `d` coordinates, each in `[-sqrt(2/d), sqrt(2/d)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashVector {
    pub values: Vec<f64>,
}

impl HashVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn dot(&self, other: &HashVector) -> f64 {
        let mut acc = KahanSum::default();
        for (a, b) in self.values.iter().zip(&other.values) {
            acc.add(a * b);
        }
        acc.value()
    }

    pub fn zeros(d: usize) -> Self {
        HashVector { values: vec![0.0; d] }
    }
}

/// Sample a basis: `omega` entries Gaussian with variance `2*gamma`, offsets
/// uniform on `[0, 2pi)`. Reproducible from the spec.
pub fn sample_basis(gamma: f64, d: usize, n: usize, seed: u64) -> Result<RffBasis> {
    if d == 0 || n == 0 {
        return Err(Error::invalid("basis needs d >= 1 and n >= 1"));
    }
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    let mut rng = seeded_rng(seed);
    let sigma = (2.0 * gamma).sqrt();
    let omegas: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            (0..n)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let offsets: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    Ok(RffBasis {
        omegas,
        offsets,
        spec: BasisSpec { seed, gamma, d, n },
        scale: (2.0 / d as f64).sqrt(),
    })
}

impl RffBasis {
    pub fn from_spec(spec: &BasisSpec) -> Result<Self> {
        sample_basis(spec.gamma, spec.d, spec.n, spec.seed)
    }

    pub fn spec(&self) -> BasisSpec {
        self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn input_dim(&self) -> usize {
        self.spec.n
    }

    /// Per-coordinate magnitude bound of any hash, `sqrt(2/d)`.
    pub fn coordinate_bound(&self) -> f64 {
        self.scale
    }

    #[cfg(test)]
    pub(crate) fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    #[cfg(test)]
    pub(crate) fn omegas(&self) -> &[Vec<f64>] {
        &self.omegas
    }

    /// Test hook: zero every offset so `cos(omega . x)` is exposed directly.
    #[cfg(test)]
    pub(crate) fn zero_offsets(&mut self) {
        for b in self.offsets.iter_mut() {
            *b = 0.0;
        }
    }
}

/// Hash one point.
pub fn hash_point(basis: &RffBasis, x: &DataPoint) -> Result<HashVector> {
    if x.dim() != basis.spec.n {
        return Err(Error::DimMismatch {
            expected: basis.spec.n,
            got: x.dim(),
        });
    }
    let values = basis
        .omegas
        .iter()
        .zip(&basis.offsets)
        .map(|(omega, b)| {
            let mut dot = 0.0;
            for (w, c) in omega.iter().zip(&x.coords) {
                dot += w * c;
            }
            basis.scale * (dot + b).cos()
        })
        .collect();
    Ok(HashVector { values })
}

/// Hash every point of a dataset, preserving order.
pub fn hash_dataset(basis: &RffBasis, d: &Dataset) -> Result<Vec<HashVector>> {
    d.points.iter().map(|p| hash_point(basis, p)).collect()
}

/// Coordinate-wise mean of a non-empty hash list (the exact, non-private
/// counterpart of the private mean release).
pub fn mean_hash(hashes: &[HashVector]) -> Result<HashVector> {
    let first = hashes.first().ok_or(Error::EmptyDataset("mean of no hashes"))?;
    let d = first.dim();
    let q = hashes.len() as f64;
    let mut values = Vec::with_capacity(d);
    for i in 0..d {
        let mut acc = KahanSum::default();
        for h in hashes {
            acc.add(h.values[i]);
        }
        values.push(acc.value() / q);
    }
    Ok(HashVector { values })
}
