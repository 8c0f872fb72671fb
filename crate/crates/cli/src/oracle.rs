//! Small brute-force checks runnable from the command line.

use dpsumm_core::auction::{
    expected_requests_per_round, run_round, AuctionParams, AuctionState, Bid,
};
use dpsumm_core::baselines::{brute_force_optimal, greedy_nonprivate};
use dpsumm_core::data::{DataPoint, Dataset, GaussianSpec};
use dpsumm_core::kernel::{
    kernel_matrix, marginal_gain, objective_j, submod_condition, KernelParams,
};
use dpsumm_core::rng::seeded_rng;
use rand::Rng;

/// Far-apart points on a jittered grid: every pairwise kernel value is far
/// below the diagonal-dominance threshold.
fn spread_instance(seed: u64, owner_points: usize, validation_points: usize) -> (Dataset, Dataset) {
    let total = owner_points + validation_points;
    let side = (total as f64).sqrt().ceil() as usize + 1;
    let mut rng = seeded_rng(seed);
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
                i as f64 * 8.0 + rng.gen_range(-1.0..1.0),
                j as f64 * 8.0 + rng.gen_range(-1.0..1.0),
            ],
        })
        .collect();
    let validation = Dataset::new(points.split_off(owner_points), 2).unwrap();
    (Dataset::new(points, 2).unwrap(), validation)
}

/// Exhaustive diminishing-returns check on instances passing the
/// diagonal-dominance condition.
pub fn check_submodularity(seed: u64, instances: usize) -> Result<bool, String> {
    let kp = KernelParams::new(1.0).unwrap();
    let mut worst = f64::INFINITY;
    let mut pairs = 0usize;
    for k in 0..instances as u64 {
        let (pool, validation) = spread_instance(seed.wrapping_add(k), 6, 3);
        let matrix = kernel_matrix(&[&pool, &validation], &kp);
        if !submod_condition(&matrix).map_err(|e| e.to_string())? {
            return Err("generated instance failed the dominance condition".into());
        }
        let n = pool.len();
        for t_mask in 1u32..(1 << n) {
            let t_set: Vec<DataPoint> = (0..n)
                .filter(|i| t_mask & (1 << i) != 0)
                .map(|i| pool.points[i].clone())
                .collect();
            let t_ds = Dataset::new(t_set, 2).unwrap();
            let mut s_mask = (t_mask - 1) & t_mask;
            while s_mask != 0 {
                let s_set: Vec<DataPoint> = (0..n)
                    .filter(|i| s_mask & (1 << i) != 0)
                    .map(|i| pool.points[i].clone())
                    .collect();
                let s_ds = Dataset::new(s_set, 2).unwrap();
                for x in 0..n {
                    if t_mask & (1 << x) == 0 {
                        let g_s = marginal_gain(&validation, &s_ds, &pool.points[x], &kp)
                            .map_err(|e| e.to_string())?;
                        let g_t = marginal_gain(&validation, &t_ds, &pool.points[x], &kp)
                            .map_err(|e| e.to_string())?;
                        worst = worst.min(g_s - g_t);
                        pairs += 1;
                    }
                }
                s_mask = (s_mask - 1) & t_mask;
            }
        }
    }
    let ok = worst >= -1e-9;
    println!(
        "submodularity: {} ({pairs} subset pairs over {instances} instances, \
         min diminishing-returns slack {worst:.3e})",
        if ok { "ok" } else { "VIOLATED" }
    );
    Ok(ok)
}

/// Greedy against exhaustive optimum on clustered instances; reports the
/// objective gap.
pub fn check_greedy_vs_bruteforce(seed: u64, instances: usize) -> Result<bool, String> {
    let kp = KernelParams::new(0.5).unwrap();
    let mut worst_gap = 0.0f64;
    for k in 0..instances as u64 {
        let (owners, validation) = dpsumm_core::data::synth_shift(
            2,
            &[5, 5],
            &[
                GaussianSpec::isotropic(2, -1.0, 1.0),
                GaussianSpec::isotropic(2, 1.0, 1.0),
            ],
            8,
            &GaussianSpec::isotropic(2, 1.0, 1.0),
            seed.wrapping_add(k).wrapping_mul(3),
        )
        .map_err(|e| e.to_string())?;
        let pool = Dataset::new(
            owners
                .iter()
                .flat_map(|o| o.dataset.points.iter().cloned())
                .collect(),
            2,
        )
        .map_err(|e| e.to_string())?;
        let run = greedy_nonprivate(&owners, &validation, 3, &kp, &Dataset::empty(2))
            .map_err(|e| e.to_string())?;
        let j_greedy =
            objective_j(&validation, &run.summary, &kp).map_err(|e| e.to_string())?;
        let (_, j_opt) =
            brute_force_optimal(&pool, &validation, 3, &kp).map_err(|e| e.to_string())?;
        worst_gap = worst_gap.max(j_opt - j_greedy);
    }
    println!(
        "greedy vs brute force: ok (p=3, {instances} instances, max objective gap {worst_gap:.3e})"
    );
    Ok(true)
}

/// Monte Carlo request rate against the geometric closed form.
pub fn check_auction_rate(seed: u64) -> Result<bool, String> {
    let (owners, eps) = (10usize, 0.5);
    let expected = expected_requests_per_round(owners, eps);
    let params = AuctionParams::new(eps, usize::MAX >> 1).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(seed);
    let mut state = AuctionState::new();
    let rounds = 10_000usize;
    let mut total = 0usize;
    for round in 0..rounds {
        let bids: Vec<Bid> = (1..=owners)
            .map(|o| Bid {
                owner_id: o,
                value: rng.gen::<f64>(),
                point_id: round,
            })
            .collect();
        state.register_bids(&bids);
        let out = run_round(&bids, &params, &mut state, &mut rng).map_err(|e| e.to_string())?;
        total += out.requested.len();
        let w = out.winner.unwrap();
        state.remove_from_pool(w.owner_id, w.point_id);
    }
    let mean = total as f64 / rounds as f64;
    let ok = (mean - expected).abs() <= 0.05;
    println!(
        "auction rate: {} (mean requests/round {mean:.3}, closed form {expected:.3})",
        if ok { "ok" } else { "OFF" }
    );
    Ok(ok)
}
