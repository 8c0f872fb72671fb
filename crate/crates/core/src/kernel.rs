//! RBF kernel, sample MMD², the normalized summary objective, exact marginal
//! gains, and the diagonal-dominance condition.
//!
//! For a validation set `V` of size `m` and a summary `S` of size `q`, the
//! objective is
//!
//! ```text
//! J(S) = (2 / (m q)) * sum_{y in V, x in S} k(y, x)
//!      - (1 / q^2)   * sum_{x, x' in S}     k(x, x')
//! ```
//!
//! which equals the constant `sum_{y,y' in V} k(y,y') / m^2` minus
//! `MMD^2(V, S)`, so maximizing `J` minimizes the squared MMD. All sums are
//! over indices: summaries are multisets and duplicates count.
//!
//! Pairwise sums use compensated (Kahan) accumulation in a fixed order, so
//! results are identical from run to run.

use crate::data::{DataPoint, Dataset};
use crate::error::Error;
use crate::Result;

/// RBF kernel parameters: `k(x, y) = exp(-gamma * ||x - y||^2)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelParams {
    pub gamma: f64,
}

impl KernelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(KernelParams { gamma })
    }
}

/// Compensated accumulator; add order is the caller's iteration order.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        acc += d * d;
    }
    acc
}

/// `k(x, y) = exp(-gamma * ||x - y||^2)`, in `(0, 1]`.
pub fn rbf(x: &DataPoint, y: &DataPoint, kp: &KernelParams) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    Ok((-kp.gamma * squared_distance(&x.coords, &y.coords)).exp())
}

fn rbf_unchecked(x: &DataPoint, y: &DataPoint, kp: &KernelParams) -> f64 {
    (-kp.gamma * squared_distance(&x.coords, &y.coords)).exp()
}

fn check_pair(a: &Dataset, b: &Dataset) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyDataset("mmd/objective needs non-empty datasets"));
    }
    if a.dim != b.dim {
        return Err(Error::DimMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    Ok(())
}

fn mean_kernel_within(d: &Dataset, kp: &KernelParams) -> f64 {
    let m = d.len() as f64;
    let mut acc = KahanSum::default();
    for x in &d.points {
        for y in &d.points {
            acc.add(rbf_unchecked(x, y, kp));
        }
    }
    acc.value() / (m * m)
}

fn mean_kernel_cross(a: &Dataset, b: &Dataset, kp: &KernelParams) -> f64 {
    let mut acc = KahanSum::default();
    for x in &a.points {
        for y in &b.points {
            acc.add(rbf_unchecked(x, y, kp));
        }
    }
    acc.value() / (a.len() as f64 * b.len() as f64)
}

/// Orientation-free ordering of a dataset pair, so sums that are symmetric
/// on paper come out bit-identical regardless of argument order.
fn in_canonical_order(a: &Dataset, b: &Dataset) -> bool {
    match a.len().cmp(&b.len()) {
        std::cmp::Ordering::Less => return true,
        std::cmp::Ordering::Greater => return false,
        std::cmp::Ordering::Equal => {}
    }
    for (x, y) in a.points.iter().zip(&b.points) {
        for (cx, cy) in x.coords.iter().zip(&y.coords) {
            match cx.total_cmp(cy) {
                std::cmp::Ordering::Less => return true,
                std::cmp::Ordering::Greater => return false,
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    true
}

/// Sample squared maximum mean discrepancy between two datasets.
///
/// Exactly symmetric in its arguments. The raw value is returned; tiny
/// negatives (around machine precision times the dataset size) can occur
/// for near-identical samples.
pub fn mmd_sq(a: &Dataset, b: &Dataset, kp: &KernelParams) -> Result<f64> {
    check_pair(a, b)?;
    let cross = if in_canonical_order(a, b) {
        mean_kernel_cross(a, b, kp)
    } else {
        mean_kernel_cross(b, a, kp)
    };
    Ok((mean_kernel_within(a, kp) + mean_kernel_within(b, kp)) - 2.0 * cross)
}

/// The normalized objective `J(summary)` against `validation`.
///
/// Undefined for an empty summary. Greedy drivers that start from nothing
/// use the convention `J(empty) = 0`, which lives in the callers, not here.
pub fn objective_j(validation: &Dataset, summary: &Dataset, kp: &KernelParams) -> Result<f64> {
    check_pair(validation, summary)?;
    Ok(2.0 * mean_kernel_cross(validation, summary, kp) - mean_kernel_within(summary, kp))
}

/// Exact marginal gain `J(summary + x) - J(summary)` via the incremental
/// expansion: only the sums touching `x` are formed on top of the running
/// cross and within sums, no full recomputation of `J(summary + x)`.
pub fn marginal_gain(
    validation: &Dataset,
    summary: &Dataset,
    x: &DataPoint,
    kp: &KernelParams,
) -> Result<f64> {
    check_pair(validation, summary)?;
    if x.dim() != validation.dim {
        return Err(Error::DimMismatch {
            expected: validation.dim,
            got: x.dim(),
        });
    }
    let state = ObjectiveState::build(validation, summary, kp)?;
    Ok(state.gain(x))
}

/// Running sums for one summary, supporting O(m + q) gain queries and O(m + q)
/// point insertion. `cross` is the kernel sum between validation and summary,
/// `within` the kernel sum over summary pairs (diagonal included).
#[derive(Debug, Clone)]
pub struct ObjectiveState<'a> {
    validation: &'a Dataset,
    kp: KernelParams,
    members: Vec<DataPoint>,
    cross: f64,
    within: f64,
}

impl<'a> ObjectiveState<'a> {
    /// Start from an empty summary (the `J(empty) = 0` convention).
    pub fn new(validation: &'a Dataset, kp: &KernelParams) -> Result<Self> {
        if validation.is_empty() {
            return Err(Error::EmptyDataset("objective needs a validation set"));
        }
        Ok(ObjectiveState {
            validation,
            kp: *kp,
            members: Vec::new(),
            cross: 0.0,
            within: 0.0,
        })
    }

    /// Start from an existing summary.
    pub fn build(validation: &'a Dataset, summary: &Dataset, kp: &KernelParams) -> Result<Self> {
        let mut s = Self::new(validation, kp)?;
        if summary.dim != validation.dim {
            return Err(Error::DimMismatch {
                expected: validation.dim,
                got: summary.dim,
            });
        }
        for p in &summary.points {
            s.insert(p.clone());
        }
        Ok(s)
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Kernel sum from `x` to the validation set.
    pub fn cross_sum_of(&self, x: &DataPoint) -> f64 {
        let mut acc = KahanSum::default();
        for y in &self.validation.points {
            acc.add(rbf_unchecked(x, y, &self.kp));
        }
        acc.value()
    }

    fn within_sum_of(&self, x: &DataPoint) -> f64 {
        let mut acc = KahanSum::default();
        for y in &self.members {
            acc.add(rbf_unchecked(x, y, &self.kp));
        }
        acc.value()
    }

    /// Current objective value; 0 for the empty summary by convention.
    pub fn objective(&self) -> f64 {
        let q = self.members.len() as f64;
        if self.members.is_empty() {
            return 0.0;
        }
        let m = self.validation.len() as f64;
        2.0 * self.cross / (m * q) - self.within / (q * q)
    }

    /// Gain of adding `x`, against the `J(empty) = 0` convention when the
    /// summary is still empty.
    pub fn gain(&self, x: &DataPoint) -> f64 {
        let m = self.validation.len() as f64;
        let c_x = self.cross_sum_of(x);
        let k_xx = rbf_unchecked(x, x, &self.kp);
        if self.members.is_empty() {
            return 2.0 * c_x / m - k_xx;
        }
        let q = self.members.len() as f64;
        let w_x = self.within_sum_of(x);
        let cross_term = 2.0 / m * ((self.cross + c_x) / (q + 1.0) - self.cross / q);
        let within_term =
            (self.within + 2.0 * w_x + k_xx) / ((q + 1.0) * (q + 1.0)) - self.within / (q * q);
        cross_term - within_term
    }

    pub fn insert(&mut self, x: DataPoint) {
        self.cross += self.cross_sum_of(&x);
        self.within += 2.0 * self.within_sum_of(&x) + rbf_unchecked(&x, &x, &self.kp);
        self.members.push(x);
    }
}

/// Check the diagonal-dominance condition on a kernel matrix: constant
/// diagonal `k*` and every off-diagonal at most `k* / (N^3 + 3N^2 + N)`.
/// Under this condition the objective is monotone with diminishing returns
/// over non-empty summaries.
pub fn submod_condition(kmatrix: &[Vec<f64>]) -> Result<bool> {
    let n = kmatrix.len();
    if n == 0 {
        return Err(Error::NotSquare { rows: 0, cols: 0 });
    }
    for row in kmatrix {
        if row.len() != n {
            return Err(Error::NotSquare {
                rows: n,
                cols: row.len(),
            });
        }
    }
    let kstar = kmatrix[0][0];
    for (i, row) in kmatrix.iter().enumerate() {
        if (row[i] - kstar).abs() > 1e-12 * kstar.abs().max(1.0) {
            return Err(Error::invalid("kernel matrix diagonal is not constant"));
        }
    }
    let nf = n as f64;
    let threshold = kstar / (nf * nf * nf + 3.0 * nf * nf + nf);
    for (i, row) in kmatrix.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i != j && v > threshold {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Kernel matrix of all points in the given datasets, in iteration order.
pub fn kernel_matrix(datasets: &[&Dataset], kp: &KernelParams) -> Vec<Vec<f64>> {
    let all: Vec<&DataPoint> = datasets.iter().flat_map(|d| d.points.iter()).collect();
    all.iter()
        .map(|x| all.iter().map(|y| rbf_unchecked(x, y, kp)).collect())
        .collect()
}
