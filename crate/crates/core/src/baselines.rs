//! Non-private reference algorithms: exact greedy, greedy over exact mean
//! hashes, uniform sampling, and a brute-force optimum for tiny instances.
//! These ignore privacy and parsimony entirely; they exist as comparison
//! points and test oracles.

use rand::Rng;

use crate::data::{Dataset, OwnerSplit};
use crate::error::Error;
use crate::kernel::{objective_j, KernelParams, ObjectiveState};
use crate::protocol::{bid_score, BidForm};
use crate::rff::{self, HashVector, RffBasis};
use crate::rng::seeded_rng;
use crate::Result;

/// One selected point, by identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pick {
    pub owner_id: usize,
    pub point_id: usize,
}

#[derive(Debug, Clone)]
pub struct GreedyRun {
    /// The selected points, seed set excluded, in selection order.
    pub summary: Dataset,
    pub picks: Vec<Pick>,
    /// Exact marginal gain realized at each step.
    pub gains: Vec<f64>,
}

/// Exact greedy: `p` rounds of marginal-gain maximization over all remaining
/// owner points, with exact kernel sums. The strongest baseline.
///
/// `seed_set` (possibly empty) starts the working summary but is excluded
/// from the returned one. Ties break to the smallest (owner, point),
/// scanning owners and points in order with strict improvement.
pub fn greedy_nonprivate(
    owners: &[OwnerSplit],
    validation: &Dataset,
    p: usize,
    kp: &KernelParams,
    seed_set: &Dataset,
) -> Result<GreedyRun> {
    let total: usize = owners.iter().map(|o| o.dataset.len()).sum();
    let mut state = ObjectiveState::new(validation, kp)?;
    for s in &seed_set.points {
        state.insert(s.clone());
    }
    let mut taken: Vec<Vec<bool>> = owners.iter().map(|o| vec![false; o.dataset.len()]).collect();
    let mut summary = Dataset::empty(validation.dim);
    let mut picks = Vec::new();
    let mut gains = Vec::new();

    for _ in 0..p.min(total) {
        let mut best: Option<(Pick, f64)> = None;
        for (oi, owner) in owners.iter().enumerate() {
            for (pi, point) in owner.dataset.points.iter().enumerate() {
                if taken[oi][pi] {
                    continue;
                }
                let g = state.gain(point);
                match &best {
                    Some((_, bg)) if *bg >= g => {}
                    _ => {
                        best = Some((
                            Pick {
                                owner_id: owner.owner_id,
                                point_id: pi,
                            },
                            g,
                        ))
                    }
                }
            }
        }
        let (pick, gain) = best.expect("candidates remain");
        let oi = owners
            .iter()
            .position(|o| o.owner_id == pick.owner_id)
            .unwrap();
        taken[oi][pick.point_id] = true;
        let point = owners[oi].dataset.points[pick.point_id].clone();
        state.insert(point.clone());
        summary.push(point)?;
        picks.push(pick);
        gains.push(gain);
    }
    Ok(GreedyRun {
        summary,
        picks,
        gains,
    })
}

/// Greedy over exact hashed means: at each step broadcast the exact mean
/// hash of the validation set and of the working summary, and pick the point
/// maximizing the bid expression. This is the sequence the protocol follows
/// when its releases are replaced by exact means, so noise-off protocol runs
/// must match it pick for pick.
pub fn greedy_hashed(
    owners: &[OwnerSplit],
    validation: &Dataset,
    p: usize,
    basis: &RffBasis,
    seed_set: &Dataset,
    form: BidForm,
) -> Result<GreedyRun> {
    if seed_set.is_empty() {
        return Err(Error::EmptyDataset("hashed greedy needs a seed set"));
    }
    let total: usize = owners.iter().map(|o| o.dataset.len()).sum();
    let g_tilde = rff::mean_hash(&rff::hash_dataset(basis, validation)?)?;
    let owner_hashes: Vec<Vec<HashVector>> = owners
        .iter()
        .map(|o| rff::hash_dataset(basis, &o.dataset))
        .collect::<Result<_>>()?;

    // Running sum of summary hashes; mean = sum / size.
    let mut summary_sum = HashVector::zeros(basis.d());
    let mut summary_size = 0usize;
    let add_to_summary = |sum: &mut HashVector, h: &HashVector| {
        for (a, b) in sum.values.iter_mut().zip(&h.values) {
            *a += b;
        }
    };
    for h in rff::hash_dataset(basis, seed_set)? {
        add_to_summary(&mut summary_sum, &h);
        summary_size += 1;
    }

    let mut taken: Vec<Vec<bool>> = owners.iter().map(|o| vec![false; o.dataset.len()]).collect();
    let mut exact = ObjectiveState::new(validation, &KernelParams::new(basis.spec().gamma)?)?;
    for s in &seed_set.points {
        exact.insert(s.clone());
    }
    let mut summary = Dataset::empty(validation.dim);
    let mut picks = Vec::new();
    let mut gains = Vec::new();

    for ell in 1..=p.min(total) {
        let g_ell = HashVector {
            values: summary_sum
                .values
                .iter()
                .map(|v| v / summary_size as f64)
                .collect(),
        };
        let mut best: Option<(Pick, f64)> = None;
        for (oi, owner) in owners.iter().enumerate() {
            for (pi, h) in owner_hashes[oi].iter().enumerate() {
                if taken[oi][pi] {
                    continue;
                }
                let value = bid_score(form, &g_tilde, &g_ell, h, summary_size, ell);
                match &best {
                    Some((_, bv)) if *bv >= value => {}
                    _ => {
                        best = Some((
                            Pick {
                                owner_id: owner.owner_id,
                                point_id: pi,
                            },
                            value,
                        ))
                    }
                }
            }
        }
        let (pick, _) = best.expect("candidates remain");
        let oi = owners
            .iter()
            .position(|o| o.owner_id == pick.owner_id)
            .unwrap();
        taken[oi][pick.point_id] = true;
        let point = owners[oi].dataset.points[pick.point_id].clone();
        gains.push(exact.gain(&point));
        exact.insert(point.clone());
        add_to_summary(&mut summary_sum, &owner_hashes[oi][pick.point_id]);
        summary_size += 1;
        summary.push(point)?;
        picks.push(pick);
    }
    Ok(GreedyRun {
        summary,
        picks,
        gains,
    })
}

/// Uniform sampling: `p/K` points per owner without replacement, remainder
/// round-robin in owner order; owners short of their quota push the deficit
/// onto owners with spare points.
pub fn uniform_sampling(
    owners: &[OwnerSplit],
    p: usize,
    rng_seed: u64,
) -> Result<(Dataset, Vec<Pick>)> {
    let total: usize = owners.iter().map(|o| o.dataset.len()).sum();
    if total < p {
        return Err(Error::InsufficientPoints {
            need: p,
            have: total,
        });
    }
    let k = owners.len();
    if k == 0 {
        return Err(Error::invalid("no owners"));
    }
    let base = p / k;
    let rem = p % k;
    let mut quota: Vec<usize> = (0..k).map(|i| base + usize::from(i < rem)).collect();
    // Redistribute what owners cannot supply.
    loop {
        let mut deficit = 0usize;
        for (q, o) in quota.iter_mut().zip(owners) {
            if *q > o.dataset.len() {
                deficit += *q - o.dataset.len();
                *q = o.dataset.len();
            }
        }
        if deficit == 0 {
            break;
        }
        let mut placed = false;
        for (q, o) in quota.iter_mut().zip(owners) {
            while deficit > 0 && *q < o.dataset.len() {
                *q += 1;
                deficit -= 1;
                placed = true;
            }
        }
        if deficit == 0 {
            break;
        }
        if !placed {
            return Err(Error::InsufficientPoints {
                need: p,
                have: total,
            });
        }
    }

    let mut rng = seeded_rng(rng_seed);
    let dim = owners
        .iter()
        .find(|o| !o.dataset.is_empty())
        .map(|o| o.dataset.dim)
        .unwrap_or(0);
    let mut summary = Dataset::empty(dim);
    let mut picks = Vec::with_capacity(p);
    for (o, &q) in owners.iter().zip(&quota) {
        // Partial Fisher-Yates: the first q entries are a uniform sample
        // without replacement.
        let mut idx: Vec<usize> = (0..o.dataset.len()).collect();
        for i in 0..q {
            let j = rng.gen_range(i..idx.len());
            idx.swap(i, j);
        }
        for &pi in idx.iter().take(q) {
            summary.push(o.dataset.points[pi].clone())?;
            picks.push(Pick {
                owner_id: o.owner_id,
                point_id: pi,
            });
        }
    }
    Ok((summary, picks))
}

/// Exhaustive maximization of the objective over all size-`p` subsets.
/// Guarded to instances with at most one million candidate subsets.
pub fn brute_force_optimal(
    points: &Dataset,
    validation: &Dataset,
    p: usize,
    kp: &KernelParams,
) -> Result<(Dataset, f64)> {
    let n = points.len();
    if p == 0 || p > n {
        return Err(Error::invalid(format!("subset size {p} of {n} points")));
    }
    let mut combos: f64 = 1.0;
    for i in 0..p {
        combos *= (n - i) as f64 / (i + 1) as f64;
    }
    if combos > 1e6 {
        return Err(Error::InstanceTooLarge(format!(
            "C({n},{p}) = {combos:.0} subsets"
        )));
    }

    let mut best_j = f64::NEG_INFINITY;
    let mut best: Vec<usize> = Vec::new();
    let mut subset: Vec<usize> = (0..p).collect();
    loop {
        let candidate = Dataset::new(
            subset.iter().map(|&i| points.points[i].clone()).collect(),
            points.dim,
        )?;
        let j = objective_j(validation, &candidate, kp)?;
        if j > best_j {
            best_j = j;
            best = subset.clone();
        }
        // next combination in lexicographic order
        let mut i = p;
        loop {
            if i == 0 {
                let out = Dataset::new(
                    best.iter().map(|&i| points.points[i].clone()).collect(),
                    points.dim,
                )?;
                return Ok((out, best_j));
            }
            i -= 1;
            if subset[i] != i + n - p {
                subset[i] += 1;
                for j in i + 1..p {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}
