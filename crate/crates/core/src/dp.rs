//! Private mean release of a set of hash vectors.
//!
//! The release quantizes each scaled hash coordinate onto a symmetric grid
//! `S = {-1, -1+eta, ..., 1-eta, 1}` with unbiased stochastic rounding, then
//! runs `T` multiplicative-weights iterations against the per-coordinate sum
//! queries `w(D_Q, i)`: each iteration picks a coordinate through the
//! exponential mechanism (probability proportional to `exp(eps * score)`,
//! taken literally, with no sensitivity divisor), measures its column sum
//! with Laplace noise of scale `1/eps`, and reweights the synthetic
//! distribution.
//!
//! The synthetic distribution over `S^d` stays a product of `d` marginals:
//! the update touches only the chosen coordinate's marginal, so state is
//! exactly `d * |S|` reals rather than `|S|^d`. The released vector is
//! `sqrt(2/d) * w(P_avg, .) / q`, where `P_avg` averages the iterates.
//!
//! Each call consumes `2T` privacy events of magnitude `eps` (T coordinate
//! selections plus T noisy measurements); the receipt reports them for the
//! ledger. A separate noise-free entry point exists for calibration tests
//! only and is never routed through privacy accounting.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernel::KahanSum;
use crate::privacy::{exp_mech, laplace};
use crate::rff::HashVector;
use crate::rng::seeded_rng;
use crate::Result;

/// The quantization grid `S`, symmetric about zero with step `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantGrid {
    pub eta: f64,
    points: Vec<f64>,
}

impl QuantGrid {
    /// `eta` must divide 2 into an integer number of steps.
    pub fn new(eta: f64) -> Result<Self> {
        if eta <= 0.0 || eta > 2.0 || !eta.is_finite() {
            return Err(Error::invalid(format!("eta {eta} out of (0, 2]")));
        }
        let steps_f = 2.0 / eta;
        let steps = steps_f.round() as usize;
        if steps == 0 || (steps_f - steps as f64).abs() > 1e-9 {
            return Err(Error::invalid(format!("2/eta = {steps_f} is not an integer")));
        }
        // Build the negative half exactly and mirror it, so the grid is
        // symmetric to the bit.
        let mut points = vec![0.0; steps + 1];
        for k in 0..=steps / 2 {
            let v = -1.0 + k as f64 * eta;
            points[k] = v;
            points[steps - k] = -v;
        }
        if steps % 2 == 0 {
            points[steps / 2] = 0.0;
        }
        Ok(QuantGrid { eta, points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rows of grid values, one per input hash.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDataset {
    pub rows: Vec<Vec<f64>>,
    pub q: usize,
    pub d: usize,
}

impl QuantizedDataset {
    /// Column sum `w(D_Q, i)`.
    pub fn column_sum(&self, i: usize) -> f64 {
        let mut acc = KahanSum::default();
        for row in &self.rows {
            acc.add(row[i]);
        }
        acc.value()
    }
}

/// Unbiased stochastic rounding of `x` in `[-1, 1]` onto the grid: the two
/// neighbouring grid points are returned with probabilities linear in the
/// distance, so `E[Q(x)] = x`. Grid points round to themselves.
pub fn quantize_scalar(x: f64, grid: &QuantGrid, rng: &mut impl Rng) -> Result<f64> {
    // Tolerate float spill from the hash scaling; reject anything real.
    let x = if x.abs() <= 1.0 {
        x
    } else if x.abs() - 1.0 <= 1e-9 {
        x.signum()
    } else {
        return Err(Error::OutOfRange {
            value: x,
            lo: -1.0,
            hi: 1.0,
        });
    };
    let steps = grid.points.len() - 1;
    let k = (((x + 1.0) / grid.eta).floor() as usize).min(steps);
    if k == steps {
        return Ok(grid.points[steps]);
    }
    let lo = grid.points[k];
    let hi = grid.points[k + 1];
    let p_hi = ((x - lo) / grid.eta).clamp(0.0, 1.0);
    Ok(if rng.gen::<f64>() < p_hi { hi } else { lo })
}

/// Quantize a list of hash vectors: each coordinate is scaled by
/// `sqrt(d/2)` (so the hash bound `sqrt(2/d)` maps onto `[-1, 1]`) and then
/// stochastically rounded.
pub fn quantize_dataset(
    hashes: &[HashVector],
    grid: &QuantGrid,
    rng: &mut impl Rng,
) -> Result<QuantizedDataset> {
    let first = hashes
        .first()
        .ok_or(Error::EmptyDataset("quantize of no hashes"))?;
    let d = first.dim();
    let scale = (d as f64 / 2.0).sqrt();
    let mut rows = Vec::with_capacity(hashes.len());
    for h in hashes {
        if h.dim() != d {
            return Err(Error::DimMismatch {
                expected: d,
                got: h.dim(),
            });
        }
        let mut row = Vec::with_capacity(d);
        for &v in &h.values {
            row.push(quantize_scalar(scale * v, grid, rng)?);
        }
        rows.push(row);
    }
    Ok(QuantizedDataset {
        q: rows.len(),
        d,
        rows,
    })
}

/// A product distribution over `S^d`: `d` independent marginals, each a pmf
/// over the grid. Storage is exactly `d * |S|` reals.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDistribution {
    pub grid: QuantGrid,
    marginals: Vec<Vec<f64>>,
}

impl ProductDistribution {
    pub fn uniform(d: usize, grid: &QuantGrid) -> Self {
        let s = grid.len();
        ProductDistribution {
            grid: grid.clone(),
            marginals: vec![vec![1.0 / s as f64; s]; d],
        }
    }

    pub fn d(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginal(&self, i: usize) -> &[f64] {
        &self.marginals[i]
    }

    /// `w(P, i) = q * sum_s s * P_i(s)`: the expected column sum of `q`
    /// draws from the marginal.
    pub fn expected_column_sum(&self, i: usize, q: usize) -> f64 {
        let mut acc = KahanSum::default();
        for (s, p) in self.grid.points.iter().zip(&self.marginals[i]) {
            acc.add(s * p);
        }
        q as f64 * acc.value()
    }

    /// Multiplicative reweighting of marginal `i` by
    /// `exp(s * (mu - w(P, i)) / (2q))`, renormalized. Exponents are shifted
    /// by their maximum before exponentiation, which the renormalization
    /// cancels, to keep large noisy measurements from overflowing. Only the
    /// addressed marginal changes; the others are untouched bit for bit.
    ///
    /// If a marginal has already collapsed to a point mass and an extreme
    /// opposite-sign measurement underflows every weight, the update is
    /// redone in log space (mass then concentrates on the supported grid
    /// point with the largest `ln p + s*c`).
    pub fn reweight(&mut self, i: usize, mu: f64, q: usize) {
        let w = self.expected_column_sum(i, q);
        let c = (mu - w) / (2.0 * q as f64);
        let max_e = self
            .grid
            .points
            .iter()
            .map(|s| s * c)
            .fold(f64::NEG_INFINITY, f64::max);
        let marginal = &mut self.marginals[i];
        let before = marginal.clone();
        let mut total = 0.0;
        for (p, s) in marginal.iter_mut().zip(self.grid.points.iter()) {
            *p *= (s * c - max_e).exp();
            total += *p;
        }
        if total > 0.0 {
            for p in marginal.iter_mut() {
                *p /= total;
            }
            return;
        }
        let log_weights: Vec<f64> = before
            .iter()
            .zip(self.grid.points.iter())
            .map(|(p, s)| if *p > 0.0 { p.ln() + s * c } else { f64::NEG_INFINITY })
            .collect();
        let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut log_total = 0.0;
        for (p, lw) in marginal.iter_mut().zip(&log_weights) {
            *p = (lw - top).exp();
            log_total += *p;
        }
        for p in marginal.iter_mut() {
            *p /= log_total;
        }
    }
}

/// Parameters of one private release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReleaseParams {
    /// Per-iteration epsilon, shared by the coordinate selection and the
    /// noisy measurement.
    pub epsilon: f64,
    /// Iteration count `T`.
    pub iterations: usize,
    pub eta: f64,
    pub rng_seed: u64,
}

impl ReleaseParams {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("release epsilon {}", self.epsilon)));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("release needs at least one iteration"));
        }
        QuantGrid::new(self.eta).map(|_| ())
    }
}

/// What one release consumed, for the ledger: `T` selections and `T`
/// measurements, each `epsilon`-private.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReleaseReceipt {
    pub epsilon: f64,
    pub selection_events: usize,
    pub measurement_events: usize,
}

impl ReleaseReceipt {
    pub fn total_events(&self) -> usize {
        self.selection_events + self.measurement_events
    }
}

/// One multiplicative-weights step as it happened; consumed by equivalence
/// tests and the protocol trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwStepRecord {
    pub chosen: usize,
    pub noisy_sum: f64,
}

/// Score of coordinate `i`: `|w(P, i) - w(D_Q, i)|`.
pub fn score(dist: &ProductDistribution, dq: &QuantizedDataset, i: usize) -> f64 {
    (dist.expected_column_sum(i, dq.q) - dq.column_sum(i)).abs()
}

/// Pick a coordinate with probability proportional to `exp(epsilon * score)`.
pub fn select_coordinate(scores: &[f64], epsilon: f64, rng: &mut impl Rng) -> Result<usize> {
    exp_mech(scores, epsilon, rng)
}

/// One private multiplicative-weights step: select a coordinate, measure its
/// column sum with Laplace noise of scale `1/epsilon`, reweight that marginal
/// only. Returns the chosen coordinate and the noisy measurement.
pub fn mw_step(
    dist: &mut ProductDistribution,
    dq: &QuantizedDataset,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<MwStepRecord> {
    let scores: Vec<f64> = (0..dist.d()).map(|i| score(dist, dq, i)).collect();
    let chosen = select_coordinate(&scores, epsilon, rng)?;
    let noisy_sum = dq.column_sum(chosen) + laplace(1.0 / epsilon, rng);
    dist.reweight(chosen, noisy_sum, dq.q);
    Ok(MwStepRecord { chosen, noisy_sum })
}

enum ReleaseMode {
    Private { epsilon: f64 },
    /// Argmax selection, exact measurements. Calibration only.
    NoiseFree,
}

struct ReleaseRun {
    output: HashVector,
    steps: Vec<MwStepRecord>,
}

fn run_release(
    hashes: &[HashVector],
    eta: f64,
    iterations: usize,
    mode: ReleaseMode,
    rng: &mut ChaCha12Rng,
) -> Result<ReleaseRun> {
    let grid = QuantGrid::new(eta)?;
    let dq = quantize_dataset(hashes, &grid, rng)?;
    let (d, q) = (dq.d, dq.q);
    let mut dist = ProductDistribution::uniform(d, &grid);
    let mut avg_w = vec![0.0; d];
    let mut w_p: Vec<f64> = (0..d).map(|i| dist.expected_column_sum(i, q)).collect();
    let w_dq: Vec<f64> = (0..d).map(|i| dq.column_sum(i)).collect();
    let mut steps = Vec::with_capacity(iterations);

    for _ in 0..iterations {
        let scores: Vec<f64> = (0..d).map(|i| (w_p[i] - w_dq[i]).abs()).collect();
        let (chosen, noisy_sum) = match mode {
            ReleaseMode::Private { epsilon } => {
                let chosen = select_coordinate(&scores, epsilon, rng)?;
                (chosen, w_dq[chosen] + laplace(1.0 / epsilon, rng))
            }
            ReleaseMode::NoiseFree => {
                let chosen = scores
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                (chosen, w_dq[chosen])
            }
        };
        dist.reweight(chosen, noisy_sum, q);
        w_p[chosen] = dist.expected_column_sum(chosen, q);
        for (acc, w) in avg_w.iter_mut().zip(&w_p) {
            *acc += w;
        }
        steps.push(MwStepRecord { chosen, noisy_sum });
    }

    let scale = (2.0 / d as f64).sqrt();
    let values = avg_w
        .iter()
        .map(|w| scale * (w / iterations as f64) / q as f64)
        .collect();
    Ok(ReleaseRun {
        output: HashVector { values },
        steps,
    })
}

/// The private release: returns the estimated mean hash vector and the
/// privacy receipt.
pub fn h2(hashes: &[HashVector], params: &ReleaseParams) -> Result<(HashVector, ReleaseReceipt)> {
    let (out, receipt, _) = h2_traced(hashes, params)?;
    Ok((out, receipt))
}

/// As [`h2`], also returning the per-step records.
pub fn h2_traced(
    hashes: &[HashVector],
    params: &ReleaseParams,
) -> Result<(HashVector, ReleaseReceipt, Vec<MwStepRecord>)> {
    params.validate()?;
    if hashes.is_empty() {
        return Err(Error::EmptyDataset("private release of no hashes"));
    }
    let mut rng = seeded_rng(params.rng_seed);
    let run = run_release(
        hashes,
        params.eta,
        params.iterations,
        ReleaseMode::Private {
            epsilon: params.epsilon,
        },
        &mut rng,
    )?;
    let receipt = ReleaseReceipt {
        epsilon: params.epsilon,
        selection_events: params.iterations,
        measurement_events: params.iterations,
    };
    Ok((run.output, receipt, run.steps))
}

/// Noise-free calibration variant: coordinate selection by argmax, exact
/// measurements. No receipt is produced and nothing is recorded against any
/// budget; this entry point exists so accuracy tests can isolate the
/// quantization and averaging error.
pub fn h2_noise_free(
    hashes: &[HashVector],
    eta: f64,
    iterations: usize,
    rng_seed: u64,
) -> Result<HashVector> {
    if hashes.is_empty() {
        return Err(Error::EmptyDataset("private release of no hashes"));
    }
    if iterations == 0 {
        return Err(Error::invalid("release needs at least one iteration"));
    }
    let mut rng = seeded_rng(rng_seed);
    let run = run_release(hashes, eta, iterations, ReleaseMode::NoiseFree, &mut rng)?;
    Ok(run.output)
}
