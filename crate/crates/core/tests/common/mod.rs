//! Shared test oracles, independent of the library code paths they check.
#![allow(dead_code)] // each test binary uses its own subset

use dpsumm_core::data::{DataPoint, Dataset, OwnerSplit};
use dpsumm_core::dp::{MwStepRecord, QuantGrid};
use dpsumm_core::kernel::{kernel_matrix, submod_condition, KernelParams};
use dpsumm_core::rng::seeded_rng;
use rand::Rng;

/// Explicit multiplicative-weights state over the full joint space `S^d`
/// (`|S|^d` probabilities), replaying a recorded (coordinate, measurement)
/// step sequence. The product-form implementation must match this oracle's
/// marginals on every step.
pub struct JointMwem {
    grid: Vec<f64>,
    d: usize,
    q: usize,
    /// One probability per point of `S^d`, indexed base-`|S|`.
    probs: Vec<f64>,
}

impl JointMwem {
    pub fn uniform(d: usize, grid: &QuantGrid, q: usize) -> Self {
        let s = grid.points().len();
        let states = s.pow(d as u32);
        JointMwem {
            grid: grid.points().to_vec(),
            d,
            q,
            probs: vec![1.0 / states as f64; states],
        }
    }

    fn digit(&self, state: usize, coordinate: usize) -> f64 {
        let s = self.grid.len();
        self.grid[(state / s.pow(coordinate as u32)) % s]
    }

    /// `w(P, i) = q * E[s_i]` under the joint distribution.
    pub fn expected_column_sum(&self, coordinate: usize) -> f64 {
        let mut acc = 0.0;
        for (state, p) in self.probs.iter().enumerate() {
            acc += p * self.digit(state, coordinate);
        }
        self.q as f64 * acc
    }

    /// One step: `P(s) <- P(s) * exp(s_i (mu - w(P, i)) / (2q))`, normalized.
    pub fn update(&mut self, coordinate: usize, mu: f64) {
        let w = self.expected_column_sum(coordinate);
        let c = (mu - w) / (2.0 * self.q as f64);
        let mut total = 0.0;
        for (state, p) in self.probs.iter_mut().enumerate() {
            let s_i = self.grid[(state / self.grid.len().pow(coordinate as u32))
                % self.grid.len()];
            *p *= (s_i * c).exp();
            total += *p;
        }
        for p in self.probs.iter_mut() {
            *p /= total;
        }
    }

    /// Marginal pmf of one coordinate.
    pub fn marginal(&self, coordinate: usize) -> Vec<f64> {
        let s = self.grid.len();
        let mut out = vec![0.0; s];
        for (state, p) in self.probs.iter().enumerate() {
            out[(state / s.pow(coordinate as u32)) % s] += p;
        }
        out
    }

    /// Replay a whole step sequence, accumulating the per-step expected
    /// column sums exactly as the release averages them.
    pub fn replay(&mut self, steps: &[MwStepRecord]) -> Vec<f64> {
        let mut avg = vec![0.0; self.d];
        for step in steps {
            self.update(step.chosen, step.noisy_sum);
            for (acc, i) in avg.iter_mut().zip(0..self.d) {
                *acc += self.expected_column_sum(i);
            }
        }
        let t = steps.len() as f64;
        let scale = (2.0 / self.d as f64).sqrt();
        avg.iter().map(|w| scale * (w / t) / self.q as f64).collect()
    }
}

/// An instance whose full kernel matrix (owner and validation points alike)
/// passes the diagonal-dominance condition: points sit on a coarse grid with
/// small jitter, so all pairwise kernel values are astronomically small.
pub struct RegimeInstance {
    pub owners: Vec<OwnerSplit>,
    pub validation: Dataset,
    pub gamma: f64,
}

impl RegimeInstance {
    /// All points of all owners as one pool, owner order.
    pub fn pooled(&self) -> Dataset {
        let mut points = Vec::new();
        for o in &self.owners {
            points.extend(o.dataset.points.iter().cloned());
        }
        Dataset::new(points, self.validation.dim).unwrap()
    }
}

pub fn regime_instance(
    seed: u64,
    owner_points: usize,
    owner_count: usize,
    validation_points: usize,
) -> RegimeInstance {
    let gamma = 1.0;
    let total = owner_points + validation_points;
    let side = (total as f64).sqrt().ceil() as usize + 1;
    let spacing = 8.0;
    let mut rng = seeded_rng(seed);

    // Distinct grid cells, shuffled, with jitter far below the spacing.
    let mut cells: Vec<(usize, usize)> = (0..side)
        .flat_map(|i| (0..side).map(move |j| (i, j)))
        .collect();
    for i in (1..cells.len()).rev() {
        let j = rng.gen_range(0..=i);
        cells.swap(i, j);
    }
    let mut points: Vec<DataPoint> = cells
        .into_iter()
        .take(total)
        .map(|(i, j)| DataPoint {
            coords: vec![
                i as f64 * spacing + rng.gen_range(-1.0..1.0),
                j as f64 * spacing + rng.gen_range(-1.0..1.0),
            ],
        })
        .collect();

    let validation = Dataset::new(points.split_off(owner_points), 2).unwrap();
    let mut owners: Vec<OwnerSplit> = (0..owner_count)
        .map(|k| OwnerSplit {
            owner_id: k + 1,
            dataset: Dataset::empty(2),
        })
        .collect();
    for (i, p) in points.into_iter().enumerate() {
        owners[i % owner_count].dataset.push(p).unwrap();
    }

    let instance = RegimeInstance {
        owners,
        validation,
        gamma,
    };
    let kp = KernelParams::new(gamma).unwrap();
    let pooled = instance.pooled();
    let matrix = kernel_matrix(&[&pooled, &instance.validation], &kp);
    assert!(
        submod_condition(&matrix).unwrap(),
        "generated instance violates the diagonal-dominance condition"
    );
    instance
}

/// Naive objective evaluation straight from the definition; the tests' own
/// reference, independent of the kernel module's accumulators.
pub fn naive_objective(validation: &Dataset, summary: &[&DataPoint], gamma: f64) -> f64 {
    let m = validation.len() as f64;
    let q = summary.len() as f64;
    let k = |a: &DataPoint, b: &DataPoint| -> f64 {
        let d2: f64 = a
            .coords
            .iter()
            .zip(&b.coords)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        (-gamma * d2).exp()
    };
    let mut cross = 0.0;
    for y in &validation.points {
        for x in summary {
            cross += k(y, x);
        }
    }
    let mut within = 0.0;
    for a in summary {
        for b in summary {
            within += k(a, b);
        }
    }
    2.0 * cross / (m * q) - within / (q * q)
}
