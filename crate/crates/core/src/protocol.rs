//! The full summarization protocol.
//!
//! One run: the aggregator seeds the summary with a non-private seed set,
//! broadcasts a private release of the validation set's mean hash once, then
//! per epoch (a) broadcasts a private release of the current summary's mean
//! hash, (b) collects one bid per owner — the owner's best hash-approximated
//! marginal gain over its unsent points, (c) requests points through the
//! auction, (d) verifies the winning point against its claimed bid and
//! appends it. The returned summary excludes the seed set.
//!
//! Ledgers are per protected set: the owner channel records everything an
//! owner observes, priced against the other owners' data (the validation
//! broadcast is independent of owner data and is logged there at epsilon 0);
//! the validation channel records the validation broadcast at its real cost.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::auction::{self, AuctionParams, AuctionState, Bid};
use crate::data::{DataPoint, Dataset, OwnerSplit};
use crate::dp::{h2, ReleaseParams};
use crate::error::Error;
use crate::kernel::{KernelParams, ObjectiveState};
use crate::privacy::{Composition, PrivacyLedger, Schedule};
use crate::rff::{self, HashVector, RffBasis};
use crate::rng::{derive_seed, seeded_rng, stream};
use crate::Result;

/// Which expression owners maximize when bidding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BidForm {
    /// `g_tilde . h(x) - (q / (q + 1)) * g_ell . h(x)` with `q` the current
    /// summary size (seed included): a positive affine transform of the
    /// hash-approximated marginal gain. Default.
    Derived,
    /// `g_ell . h(x) - (l / (l + 1)) * g_tilde . h(x)` with `l` the epoch
    /// index: the circulated form, kept for fidelity experiments.
    Literal,
}

/// Evaluate the bid expression for one hashed point.
pub fn bid_score(
    form: BidForm,
    g_tilde: &HashVector,
    g_ell: &HashVector,
    h: &HashVector,
    summary_size: usize,
    ell: usize,
) -> f64 {
    match form {
        BidForm::Derived => {
            let q = summary_size as f64;
            g_tilde.dot(h) - (q / (q + 1.0)) * g_ell.dot(h)
        }
        BidForm::Literal => {
            let l = ell as f64;
            g_ell.dot(h) - (l / (l + 1.0)) * g_tilde.dot(h)
        }
    }
}

/// Epoch-by-epoch release parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamPlan {
    /// Budgeted regime: `T = d^2` everywhere, epsilons from the schedule.
    Theory(Schedule),
    /// Field regime: a long first release, then constant short ones.
    Practical(PracticalPlan),
    /// Exact mean hashes instead of private releases, top bid always wins.
    /// Not privacy-accounted.
    NoiseOff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PracticalPlan {
    /// Per-iteration epsilon of the validation release.
    pub eps_v: f64,
    /// Per-iteration epsilon of the first epoch's release.
    pub eps_first: f64,
    /// Numerator of the later epochs' epsilon `eps_base / sqrt(p * t_subs)`.
    pub eps_base: f64,
    /// Iterations for epochs after the first.
    pub t_subs: usize,
    pub eps_auc: f64,
    pub tau: usize,
    /// Composition slack used when reporting ledger totals.
    pub delta_tilde: f64,
}

impl Default for PracticalPlan {
    fn default() -> Self {
        PracticalPlan {
            eps_v: 0.01,
            eps_first: 0.05,
            eps_base: 0.01,
            t_subs: 5,
            eps_auc: 0.5,
            tau: 4,
            delta_tilde: 1e-4,
        }
    }
}

/// Where the seed summary comes from. Its privacy is not accounted: it is
/// either synthetic or explicitly supplied as non-sensitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SeedSetSpec {
    /// `size` points from an isotropic Gaussian of the given scale.
    Synthetic { size: usize, scale: f64 },
    Provided(Dataset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Number of points to collect.
    pub p: usize,
    /// Hash dimension.
    pub d: usize,
    pub gamma: f64,
    /// Master seed for the run; every stream derives from it.
    pub seed: u64,
    pub bid_form: BidForm,
    pub plan: ParamPlan,
    pub seed_set: SeedSetSpec,
    /// Ledger entries per release iteration: 2 counts the coordinate
    /// selection and the noisy measurement separately (the accounting the
    /// composition argument uses); 1 collapses them, matching the coarser
    /// published arithmetic.
    pub events_per_iter: u8,
    /// Quantization step; defaults to `1/d`.
    pub eta: Option<f64>,
}

impl ProtocolConfig {
    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(1.0 / self.d as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::invalid("p must be at least 1"));
        }
        if self.d == 0 {
            return Err(Error::invalid("d must be at least 1"));
        }
        if self.gamma <= 0.0 {
            return Err(Error::invalid("gamma must be positive"));
        }
        if !matches!(self.events_per_iter, 1 | 2) {
            return Err(Error::invalid("events_per_iter must be 1 or 2"));
        }
        Ok(())
    }
}

/// Per-iteration epsilon and iteration count of the epoch-`ell` summary
/// release (`ell` is 1-based). Noise-off runs make no releases; they report
/// an infinite epsilon and zero iterations.
pub fn epoch_params(ell: usize, config: &ProtocolConfig) -> (f64, usize) {
    match &config.plan {
        ParamPlan::Theory(s) => (s.eps_epoch(ell), s.t),
        ParamPlan::Practical(p) => {
            if ell <= 1 {
                (p.eps_first, t_init(config.d))
            } else {
                (
                    p.eps_base / ((config.p * p.t_subs) as f64).sqrt(),
                    p.t_subs,
                )
            }
        }
        ParamPlan::NoiseOff => (f64::INFINITY, 0),
    }
}

/// Long-release iteration count, `floor(d^1.5)`.
pub fn t_init(d: usize) -> usize {
    (d as f64).powf(1.5).floor() as usize
}

fn validation_params(config: &ProtocolConfig) -> (f64, usize) {
    match &config.plan {
        ParamPlan::Theory(s) => (s.eps_v, s.t),
        ParamPlan::Practical(p) => (p.eps_v, t_init(config.d)),
        ParamPlan::NoiseOff => (f64::INFINITY, 0),
    }
}

fn auction_params(config: &ProtocolConfig, owners: usize) -> Result<AuctionParams> {
    match &config.plan {
        ParamPlan::Theory(s) => AuctionParams::new(s.eps_auc, s.tau),
        ParamPlan::Practical(p) => AuctionParams::new(p.eps_auc, p.tau),
        // Never consulted in noise-off runs; a placeholder keeps call sites
        // uniform.
        ParamPlan::NoiseOff => AuctionParams::new(1.0, owners.max(1)),
    }
}

/// A simulated data owner: its private dataset, cached hashes under the
/// shared basis, and the registry of points it has already transmitted.
#[derive(Debug, Clone)]
pub struct OwnerSim {
    pub owner_id: usize,
    pub dataset: Dataset,
    basis: Arc<RffBasis>,
    hashes: Vec<HashVector>,
    sent: BTreeSet<usize>,
    /// Test hook: scale delivered coordinates to simulate a dishonest owner.
    tamper_factor: Option<f64>,
}

impl OwnerSim {
    pub fn new(split: &OwnerSplit, basis: Arc<RffBasis>) -> Result<Self> {
        let hashes = rff::hash_dataset(&basis, &split.dataset)?;
        Ok(OwnerSim {
            owner_id: split.owner_id,
            dataset: split.dataset.clone(),
            basis,
            hashes,
            sent: BTreeSet::new(),
            tamper_factor: None,
        })
    }

    /// Make this owner deliver perturbed points (tests only).
    pub fn with_tampering(mut self, factor: f64) -> Self {
        self.tamper_factor = Some(factor);
        self
    }

    pub fn unsent_count(&self) -> usize {
        self.dataset.len() - self.sent.len()
    }

    /// The owner's bid: its best unsent point under the bid expression, or
    /// `None` if it has nothing left to offer.
    pub fn bid(
        &self,
        form: BidForm,
        g_tilde: &HashVector,
        g_ell: &HashVector,
        ell: usize,
        summary_size: usize,
    ) -> Option<Bid> {
        let mut best: Option<Bid> = None;
        for (point_id, h) in self.hashes.iter().enumerate() {
            if self.sent.contains(&point_id) {
                continue;
            }
            let value = bid_score(form, g_tilde, g_ell, h, summary_size, ell);
            match &best {
                Some(b) if b.value >= value => {}
                _ => {
                    best = Some(Bid {
                        owner_id: self.owner_id,
                        value,
                        point_id,
                    })
                }
            }
        }
        best
    }

    /// Transmit a point to the aggregator.
    fn deliver(&mut self, point_id: usize) -> DataPoint {
        self.sent.insert(point_id);
        let mut p = self.dataset.points[point_id].clone();
        if let Some(f) = self.tamper_factor {
            if let Some(c) = p.coords.first_mut() {
                *c *= f;
            }
        }
        p
    }

    pub fn basis(&self) -> &RffBasis {
        &self.basis
    }
}

/// Owner bid computation as a free function over a split (used by tests that
/// have no protocol run in flight).
pub fn owner_bid(
    owner: &OwnerSim,
    g_ell: &HashVector,
    g_tilde: &HashVector,
    ell: usize,
    summary_size: usize,
    form: BidForm,
) -> Option<Bid> {
    owner.bid(form, g_tilde, g_ell, ell, summary_size)
}

/// Recompute a claimed bid from the delivered point and accept iff it agrees
/// to relative tolerance 1e-6.
pub fn verify_bid(
    point: &DataPoint,
    claimed: &Bid,
    g_ell: &HashVector,
    g_tilde: &HashVector,
    basis: &RffBasis,
    ell: usize,
    summary_size: usize,
    form: BidForm,
) -> Result<bool> {
    let h = rff::hash_point(basis, point)?;
    let recomputed = bid_score(form, g_tilde, g_ell, &h, summary_size, ell);
    Ok((recomputed - claimed.value).abs() <= 1e-6 * claimed.value.abs().max(1.0))
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// All `p` points collected.
    Complete,
    /// Owners ran out of points first; the summary is partial.
    OwnersExhausted,
}

/// Composed totals of one ledger at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub events: usize,
    pub eps_total: f64,
    pub delta_total: f64,
}

fn snapshot(ledger: &PrivacyLedger, delta_tilde: f64) -> LedgerSnapshot {
    // Composition needs a valid slack; noise-off runs have empty ledgers and
    // any legal value gives (0, slack).
    let c = ledger
        .compose(delta_tilde)
        .unwrap_or(Composition {
            eps_sum: 0.0,
            eps_sqrt_log: 0.0,
            eps_sqrt_exp: 0.0,
            eps_total: 0.0,
            delta_total: 0.0,
            events: 0,
        });
    LedgerSnapshot {
        events: c.events,
        eps_total: c.eps_total,
        delta_total: c.delta_total,
    }
}

/// One epoch of the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub ell: usize,
    pub bids: Vec<Bid>,
    /// Owners whose round bid was transmitted.
    pub requested: Vec<usize>,
    pub winner_owner: usize,
    pub winner_point: usize,
    pub winner_bid: f64,
    /// Exact marginal gain of the appended point against the working summary.
    pub exact_gain: f64,
    /// Gap to the best exact gain among this epoch's submitted bids.
    pub gain_regret: f64,
    /// Squared MMD between collected points (seed excluded) and validation.
    pub mmd_sq_collected: f64,
    pub accessed_total: u64,
    pub owner_channel: LedgerSnapshot,
    pub validation_channel: LedgerSnapshot,
}

/// The full run record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryTrace {
    pub epochs: Vec<EpochRecord>,
    pub status: Termination,
    pub accessed_total: u64,
    /// Achieved parsimony factor: accessed / (|summary| + |validation|).
    pub parsimony_factor: f64,
    pub owner_ledger: PrivacyLedger,
    pub validation_ledger: PrivacyLedger,
    pub verification_failures: Vec<(usize, usize)>,
    pub basis: crate::rff::BasisSpec,
}

fn delta_tilde_of(config: &ProtocolConfig) -> f64 {
    match &config.plan {
        ParamPlan::Theory(s) => s.delta_tilde,
        ParamPlan::Practical(p) => p.delta_tilde,
        ParamPlan::NoiseOff => 1e-4,
    }
}

/// Materialize the seed summary.
pub fn build_seed_set(spec: &SeedSetSpec, dim: usize, seed: u64) -> Result<Dataset> {
    match spec {
        SeedSetSpec::Provided(d) => {
            if d.is_empty() {
                return Err(Error::EmptyDataset("seed set must be non-empty"));
            }
            if d.dim != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: d.dim,
                });
            }
            Ok(d.clone())
        }
        SeedSetSpec::Synthetic { size, scale } => {
            if *size == 0 {
                return Err(Error::EmptyDataset("seed set must be non-empty"));
            }
            let spec = crate::data::GaussianSpec::isotropic(dim, 0.0, *scale);
            let (mut owners, _) = crate::data::synth_shift(
                dim,
                &[*size],
                std::slice::from_ref(&spec),
                0,
                &spec,
                seed,
            )?;
            Ok(owners.remove(0).dataset)
        }
    }
}

struct Broadcaster<'a> {
    config: &'a ProtocolConfig,
    owner_ledger: PrivacyLedger,
    validation_ledger: PrivacyLedger,
}

impl<'a> Broadcaster<'a> {
    /// Release the mean hash of `hashes`. `channel_tag` routes the cost:
    /// the validation broadcast is priced on the validation channel and
    /// logged at zero on the owner channel (it is independent of owner
    /// data); epoch broadcasts are priced on the owner channel only.
    fn release(
        &mut self,
        hashes: &[HashVector],
        eps: f64,
        iterations: usize,
        seed: u64,
        about_validation: bool,
    ) -> Result<HashVector> {
        if matches!(self.config.plan, ParamPlan::NoiseOff) {
            return rff::mean_hash(hashes);
        }
        let params = ReleaseParams {
            epsilon: eps,
            iterations,
            eta: self.config.eta(),
            rng_seed: seed,
        };
        let (out, receipt) = h2(hashes, &params)?;
        debug_assert_eq!(receipt.total_events(), 2 * iterations);
        let logged = match self.config.events_per_iter {
            1 => iterations,
            _ => receipt.total_events(),
        };
        let (owner_eps, validation_eps, tag) = if about_validation {
            (0.0, eps, "h2-validation")
        } else {
            (eps, 0.0, "h2-epoch")
        };
        for _ in 0..logged {
            self.owner_ledger.record(owner_eps, 0.0, tag)?;
            if about_validation {
                self.validation_ledger.record(validation_eps, 0.0, tag)?;
            }
        }
        Ok(out)
    }
}

/// Run the protocol. Returns the collected summary (seed set excluded) and
/// the full trace.
pub fn run_protocol(
    owners: &[OwnerSplit],
    validation: &Dataset,
    config: &ProtocolConfig,
) -> Result<(Dataset, SummaryTrace)> {
    config.validate()?;
    if validation.is_empty() {
        return Err(Error::EmptyDataset("validation set"));
    }
    if owners.is_empty() {
        return Err(Error::invalid("at least one owner required"));
    }
    let total_points: usize = owners.iter().map(|o| o.dataset.len()).sum();
    let dim = validation.dim;
    for o in owners {
        if o.dataset.dim != dim && !o.dataset.is_empty() {
            return Err(Error::DimMismatch {
                expected: dim,
                got: o.dataset.dim,
            });
        }
    }

    let basis = Arc::new(rff::sample_basis(
        config.gamma,
        config.d,
        dim,
        derive_seed(config.seed, stream::BASIS),
    )?);
    let seed_set = build_seed_set(
        &config.seed_set,
        dim,
        derive_seed(config.seed, stream::SEED_SET),
    )?;
    let kp = KernelParams::new(config.gamma)?;

    let mut sims: Vec<OwnerSim> = owners
        .iter()
        .filter(|o| !o.dataset.is_empty())
        .map(|o| OwnerSim::new(o, Arc::clone(&basis)))
        .collect::<Result<_>>()?;

    run_with_sims(
        &mut sims,
        validation,
        config,
        &basis,
        seed_set,
        kp,
        total_points,
    )
}

/// As [`run_protocol`], but over pre-built owner simulators (tests use this
/// to plant a tampering owner).
pub fn run_protocol_with_owners(
    sims: &mut [OwnerSim],
    validation: &Dataset,
    config: &ProtocolConfig,
) -> Result<(Dataset, SummaryTrace)> {
    config.validate()?;
    if validation.is_empty() {
        return Err(Error::EmptyDataset("validation set"));
    }
    let basis = sims
        .first()
        .map(|s| Arc::new(s.basis().clone()))
        .ok_or_else(|| Error::invalid("at least one owner required"))?;
    let total_points: usize = sims.iter().map(|s| s.dataset.len()).sum();
    let seed_set = build_seed_set(
        &config.seed_set,
        validation.dim,
        derive_seed(config.seed, stream::SEED_SET),
    )?;
    let kp = KernelParams::new(config.gamma)?;
    run_with_sims(sims, validation, config, &basis, seed_set, kp, total_points)
}

#[allow(clippy::too_many_arguments)]
fn run_with_sims(
    sims: &mut [OwnerSim],
    validation: &Dataset,
    config: &ProtocolConfig,
    basis: &Arc<RffBasis>,
    seed_set: Dataset,
    kp: KernelParams,
    total_points: usize,
) -> Result<(Dataset, SummaryTrace)> {
    if total_points < config.p {
        return Err(Error::InsufficientPoints {
            need: config.p,
            have: total_points,
        });
    }
    let delta_tilde = delta_tilde_of(config);
    let auction_params = auction_params(config, sims.len())?;
    let noise_off = matches!(config.plan, ParamPlan::NoiseOff);

    let mut broadcaster = Broadcaster {
        config,
        owner_ledger: PrivacyLedger::new(),
        validation_ledger: PrivacyLedger::new(),
    };

    // Validation broadcast, once.
    let validation_hashes = rff::hash_dataset(basis, validation)?;
    let (eps_v, t_v) = validation_params(config);
    let g_tilde = broadcaster.release(
        &validation_hashes,
        eps_v,
        t_v,
        derive_seed(config.seed, stream::RELEASE_VALIDATION),
        true,
    )?;

    // Working summary (seed included) and its exact objective state.
    let mut summary_hashes = rff::hash_dataset(basis, &seed_set)?;
    let mut working = seed_set.clone();
    let mut objective = ObjectiveState::build(validation, &seed_set, &kp)?;
    let mut collected = Dataset::empty(validation.dim);

    let mut auction_state = AuctionState::new();
    let mut auction_rng = seeded_rng(derive_seed(config.seed, stream::AUCTION));
    // Pool bookkeeping the auction does not own: delivered points and the
    // context their bids were made in.
    let mut delivered: std::collections::BTreeMap<(usize, usize), (DataPoint, usize, usize)> =
        std::collections::BTreeMap::new();
    let mut g_history: Vec<HashVector> = Vec::new();
    let mut run_banned: BTreeSet<usize> = BTreeSet::new();
    let mut failure_counts: std::collections::BTreeMap<usize, usize> =
        std::collections::BTreeMap::new();
    let mut failures: Vec<(usize, usize)> = Vec::new();

    let mut epochs = Vec::with_capacity(config.p);
    let mut status = Termination::Complete;

    'epochs: for ell in 1..=config.p {
        let (eps_ell, t_ell) = epoch_params(ell, config);
        let g_ell = broadcaster.release(
            &summary_hashes,
            eps_ell,
            t_ell,
            derive_seed(config.seed, stream::RELEASE_EPOCH_BASE + ell as u64),
            false,
        )?;
        g_history.push(g_ell.clone());

        let q_now = working.len();
        let mut epoch_banned: BTreeSet<usize> = BTreeSet::new();
        let mut first_attempt = true;
        let mut round_bids: Vec<Bid> = Vec::new();
        let mut epoch_requested: Vec<usize> = Vec::new();

        let (winner, winner_point) = loop {
            let bids: Vec<Bid> = sims
                .iter()
                .filter(|s| !run_banned.contains(&s.owner_id))
                .filter(|s| !epoch_banned.contains(&s.owner_id))
                .filter_map(|s| s.bid(config.bid_form, &g_tilde, &g_ell, ell, q_now))
                .collect();
            if bids.is_empty() {
                status = Termination::OwnersExhausted;
                break 'epochs;
            }
            if first_attempt {
                auction_state.register_bids(&bids);
                round_bids = bids.clone();
                first_attempt = false;
            }

            let (requested, winner) = if noise_off {
                // Degenerate deterministic auction: only the top bid is
                // requested and wins; the pool never accumulates.
                let top = auction::rank_bids(&bids)[0];
                auction_state.note_transmission(top.owner_id, top.point_id);
                (vec![top.owner_id], top)
            } else {
                let outcome =
                    auction::run_round(&bids, &auction_params, &mut auction_state, &mut auction_rng)?;
                let w = outcome
                    .winner
                    .expect("pool holds at least the top bid after a round");
                (outcome.requested, w)
            };
            epoch_requested.extend(requested.iter().copied());

            // Transmit every requested point, remembering the bid context it
            // was offered under (stale pool entries are verified against the
            // broadcast they were bid on).
            for owner_id in &requested {
                let bid = bids
                    .iter()
                    .find(|b| b.owner_id == *owner_id)
                    .expect("requested owners come from this round's bids");
                let sim = sims
                    .iter_mut()
                    .find(|s| s.owner_id == *owner_id)
                    .expect("owner exists");
                let point = sim.deliver(bid.point_id);
                delivered.insert((bid.owner_id, bid.point_id), (point, ell, q_now));
            }

            let key = (winner.owner_id, winner.point_id);
            let (point, bid_ell, bid_q) = delivered
                .get(&key)
                .cloned()
                .expect("winner was delivered");
            let ok = verify_bid(
                &point,
                &winner,
                &g_history[bid_ell - 1],
                &g_tilde,
                basis,
                bid_ell,
                bid_q,
                config.bid_form,
            )?;
            auction_state.remove_from_pool(winner.owner_id, winner.point_id);
            delivered.remove(&key);
            if ok {
                break (winner, point);
            }
            // Rejected: discard the point, exclude the owner for this epoch,
            // and for the whole run after three strikes.
            failures.push((ell, winner.owner_id));
            epoch_banned.insert(winner.owner_id);
            let strikes = failure_counts.entry(winner.owner_id).or_insert(0);
            *strikes += 1;
            if *strikes >= 3 {
                run_banned.insert(winner.owner_id);
            }
        };

        // The request pattern is the only auction release owners observe.
        // Any one foreign point can perturb it in at most tau rounds (after
        // tau submissions the forced request is unconditional), so the
        // budget carries one event per epoch for the first tau epochs.
        if !noise_off && ell <= auction_params.tau {
            broadcaster
                .owner_ledger
                .record(auction_params.eps_auc, 0.0, "auction-round")?;
        }

        let exact_gain = objective.gain(&winner_point);
        let best_exact_gain = round_bids
            .iter()
            .map(|b| {
                let sim = sims.iter().find(|s| s.owner_id == b.owner_id).unwrap();
                objective.gain(&sim.dataset.points[b.point_id])
            })
            .fold(f64::NEG_INFINITY, f64::max);
        objective.insert(winner_point.clone());
        summary_hashes.push(rff::hash_point(basis, &winner_point)?);
        working.push(winner_point.clone())?;
        collected.push(winner_point)?;

        epoch_requested.sort_unstable();
        epoch_requested.dedup();
        let mmd_sq_collected = crate::kernel::mmd_sq(validation, &collected, &kp)?;
        epochs.push(EpochRecord {
            ell,
            bids: round_bids,
            requested: epoch_requested,
            winner_owner: winner.owner_id,
            winner_point: winner.point_id,
            winner_bid: winner.value,
            exact_gain,
            gain_regret: best_exact_gain - exact_gain,
            mmd_sq_collected,
            accessed_total: auction_state.accessed_total(),
            owner_channel: snapshot(&broadcaster.owner_ledger, delta_tilde),
            validation_channel: snapshot(&broadcaster.validation_ledger, delta_tilde),
        });
    }

    let accessed_total = auction_state.accessed_total();
    let parsimony_factor =
        accessed_total as f64 / (collected.len() + validation.len()).max(1) as f64;
    let trace = SummaryTrace {
        epochs,
        status,
        accessed_total,
        parsimony_factor,
        owner_ledger: broadcaster.owner_ledger,
        validation_ledger: broadcaster.validation_ledger,
        verification_failures: failures,
        basis: basis.spec(),
    };
    Ok((collected, trace))
}
