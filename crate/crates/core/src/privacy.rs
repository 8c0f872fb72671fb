//! Differential-privacy primitives, the per-epoch epsilon schedule, and the
//! adaptive-composition ledger.
//!
//! The ledger is event-driven: it records what the code actually released,
//! one `(epsilon, delta)` entry per mechanism invocation, per
//! (observer, protected-set) channel. Composition evaluates the three-term
//! adaptive bound
//!
//! ```text
//! eps_total = min( sum_l eps_l,
//!                  L + sqrt(sum_l 2 eps_l^2 * ln(1/dt)),
//!                  L + sqrt(sum_l 2 eps_l^2 * ln(e + sqrt(sum_l 2 eps_l^2)/dt)) )
//! L = sum_l eps_l * (e^{eps_l} - 1) / (e^{eps_l} + 1)
//! delta_total = 1 - (1 - dt) * prod_l (1 - delta_l)
//! ```
//!
//! All three candidate bounds are exposed alongside the minimum, because the
//! conventional budget arithmetic for long homogeneous streams quotes the
//! `ln(1/dt)` form even where the third term is smaller.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// One recorded release.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyEvent {
    pub epsilon: f64,
    pub delta: f64,
    /// Free-form label, e.g. "h2-iter" or "auction-round".
    pub tag: String,
}

impl PrivacyEvent {
    pub fn new(epsilon: f64, delta: f64, tag: impl Into<String>) -> Result<Self> {
        if epsilon < 0.0 || !epsilon.is_finite() {
            return Err(Error::invalid(format!("event epsilon {epsilon}")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::invalid(format!("event delta {delta}")));
        }
        Ok(PrivacyEvent {
            epsilon,
            delta,
            tag: tag.into(),
        })
    }
}

/// Append-only event log for one channel.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PrivacyLedger {
    events: Vec<PrivacyEvent>,
}

/// The composed totals over a ledger, with every candidate bound retained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    /// Plain sum of epsilons.
    pub eps_sum: f64,
    /// Linear term plus `sqrt(2 sum eps^2 * ln(1/dt))`.
    pub eps_sqrt_log: f64,
    /// Linear term plus the `ln(e + sqrt(2 sum eps^2)/dt)` variant.
    pub eps_sqrt_exp: f64,
    /// Minimum of the three; the composed epsilon.
    pub eps_total: f64,
    pub delta_total: f64,
    pub events: usize,
}

impl PrivacyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, event: PrivacyEvent) {
        self.events.push(event);
    }

    pub fn record(&mut self, epsilon: f64, delta: f64, tag: &str) -> Result<()> {
        self.append(PrivacyEvent::new(epsilon, delta, tag)?);
        Ok(())
    }

    pub fn events(&self) -> &[PrivacyEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Compose the ledger under k-fold adaptive composition with slack
    /// `delta_tilde` in `(0, 1/e]`.
    pub fn compose(&self, delta_tilde: f64) -> Result<Composition> {
        compose_events(self.events.iter().map(|e| (e.epsilon, e.delta)), delta_tilde)
    }
}

/// Compose an explicit `(epsilon, delta)` stream.
pub fn compose_events(
    events: impl IntoIterator<Item = (f64, f64)>,
    delta_tilde: f64,
) -> Result<Composition> {
    if delta_tilde <= 0.0 || delta_tilde > (-1.0f64).exp() {
        return Err(Error::OutOfRange {
            value: delta_tilde,
            lo: 0.0,
            hi: (-1.0f64).exp(),
        });
    }
    let mut eps_sum = 0.0;
    let mut linear = 0.0;
    let mut sq2 = 0.0; // sum of 2*eps^2
    let mut one_minus_delta = 1.0;
    let mut count = 0usize;
    for (eps, delta) in events {
        eps_sum += eps;
        // (e^eps - 1)/(e^eps + 1) = tanh(eps/2), numerically stable for
        // small eps.
        linear += eps * (eps / 2.0).tanh();
        sq2 += 2.0 * eps * eps;
        one_minus_delta *= 1.0 - delta;
        count += 1;
    }
    let eps_sqrt_log = linear + (sq2 * (1.0 / delta_tilde).ln()).sqrt();
    let eps_sqrt_exp =
        linear + (sq2 * (std::f64::consts::E + sq2.sqrt() / delta_tilde).ln()).sqrt();
    let eps_total = eps_sum.min(eps_sqrt_log).min(eps_sqrt_exp);
    Ok(Composition {
        eps_sum,
        eps_sqrt_log,
        eps_sqrt_exp,
        eps_total,
        delta_total: 1.0 - (1.0 - delta_tilde) * one_minus_delta,
        events: count,
    })
}

/// Draw from the zero-mean Laplace distribution with the given scale, by
/// inverse CDF on the shared generator.
pub fn laplace(scale: f64, rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen::<f64>() - 0.5;
    let a = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    -scale * u.signum() * a.ln()
}

/// Sample an index with probability proportional to `exp(epsilon * score)`.
///
/// Scores are shifted by their maximum before exponentiation; the sampled
/// distribution is invariant to that shift. With `epsilon = 0` (or all
/// scores equal) this is uniform.
pub fn exp_mech(scores: &[f64], epsilon: f64, rng: &mut impl Rng) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::invalid("exponential mechanism over no candidates"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("non-finite score"));
    }
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (epsilon * (s - top)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut r = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        r -= w;
        if r <= 0.0 {
            return Ok(i);
        }
    }
    Ok(scores.len() - 1)
}

/// Whether the per-epoch constant and the validation-release form follow the
/// tighter or the looser published variant. Both appear in circulation; the
/// default is the variant the correctness argument actually uses
/// (constant 36, square-root validation form).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOptions {
    /// Constant under the square root of the epoch schedule (36 or 16).
    pub epoch_constant: f64,
    /// If true, `eps_v = eps / sqrt(16 T)`; otherwise `eps_v = eps / (16 T)`.
    pub eps_v_sqrt: bool,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions {
            epoch_constant: 36.0,
            eps_v_sqrt: true,
        }
    }
}

/// The full epsilon schedule for one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eps_target: f64,
    pub delta_tilde: f64,
    /// Summary size the run is budgeted for.
    pub p: usize,
    /// Iterations per private release.
    pub t: usize,
    /// Quantization step, `2/eta` integral.
    pub eta: f64,
    pub eps_v: f64,
    pub eps_auc: f64,
    pub tau: usize,
    pub options: ScheduleOptions,
}

impl Schedule {
    /// Per-iteration epsilon of the epoch-`l` release,
    /// `eps / sqrt(c * T * l * ln(1/dt) * ln(p))`.
    pub fn eps_epoch(&self, ell: usize) -> f64 {
        let l = ell.max(1) as f64;
        self.eps_target
            / (self.options.epoch_constant
                * self.t as f64
                * l
                * (1.0 / self.delta_tilde).ln()
                * (self.p as f64).ln())
            .sqrt()
    }
}

/// Build the schedule: validation release epsilon, per-epoch epsilons,
/// auction epsilon `eps/(3 sqrt(2) ln(1/dt)) * K^(-1/3)`, and threshold
/// `tau = K^(2/3)` rounded to the nearest positive integer. `eta` defaults
/// to `1/d` (so `2/eta = 2d` is integral).
pub fn make_schedule(
    eps_target: f64,
    delta_tilde: f64,
    p: usize,
    d: usize,
    owners: usize,
    t: usize,
) -> Result<Schedule> {
    make_schedule_with(eps_target, delta_tilde, p, d, owners, t, ScheduleOptions::default())
}

pub fn make_schedule_with(
    eps_target: f64,
    delta_tilde: f64,
    p: usize,
    d: usize,
    owners: usize,
    t: usize,
    options: ScheduleOptions,
) -> Result<Schedule> {
    if eps_target <= 0.0 || !eps_target.is_finite() {
        return Err(Error::invalid("eps target must be positive"));
    }
    if delta_tilde <= 0.0 || delta_tilde > (-1.0f64).exp() {
        return Err(Error::OutOfRange {
            value: delta_tilde,
            lo: 0.0,
            hi: (-1.0f64).exp(),
        });
    }
    if p < 2 {
        return Err(Error::invalid("schedule needs p >= 2"));
    }
    if owners == 0 || d == 0 || t == 0 {
        return Err(Error::invalid("schedule needs owners, d, t >= 1"));
    }
    let tf = t as f64;
    let eps_v = if options.eps_v_sqrt {
        eps_target / (16.0 * tf).sqrt()
    } else {
        eps_target / (16.0 * tf)
    };
    let k = owners as f64;
    let eps_auc =
        eps_target / (3.0 * std::f64::consts::SQRT_2 * (1.0 / delta_tilde).ln()) * k.powf(-1.0 / 3.0);
    let tau = (k.powf(2.0 / 3.0).round() as usize).max(1);
    Ok(Schedule {
        eps_target,
        delta_tilde,
        p,
        t,
        eta: 1.0 / d as f64,
        eps_v,
        eps_auc,
        tau,
        options,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use proptest::prelude::*;

    #[test]
    fn zero_mechanisms_compose_to_slack_only() {
        let ledger = PrivacyLedger::new();
        let c = ledger.compose(1e-4).unwrap();
        assert_eq!(c.eps_total, 0.0);
        assert!((c.delta_total - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn all_zero_epsilons_compose_to_zero() {
        let mut ledger = PrivacyLedger::new();
        for _ in 0..10 {
            ledger.record(0.0, 0.0, "noop").unwrap();
        }
        let c = ledger.compose(0.01).unwrap();
        assert_eq!(c.eps_total, 0.0);
        assert!((c.delta_total - 0.01).abs() < 1e-15);
    }

    #[test]
    fn summary_channel_arithmetic() {
        // 5p events of 0.01/sqrt(5p) at slack 1e-4. The sqrt-log bound is the
        // budget figure for this stream: sum eps^2 = 1e-4, so
        // sqrt(2e-4 * ln 1e4) ~ 0.0429 plus a ~5e-5 linear term.
        for p in [20usize, 100] {
            let k = 5 * p;
            let eps = 0.01 / (k as f64).sqrt();
            let c = compose_events((0..k).map(|_| (eps, 0.0)), 1e-4).unwrap();
            assert!(
                (c.eps_sqrt_log - 0.043).abs() < 0.002,
                "p={p}: sqrt-log {}",
                c.eps_sqrt_log
            );
            // The third bound is smaller here; the reported minimum must not
            // exceed the quoted form.
            assert!(c.eps_total <= c.eps_sqrt_log);
            assert!((c.eps_total - 0.0315802).abs() < 1e-4);
        }
    }

    #[test]
    fn long_small_epsilon_channel_lands_between_one_and_two() {
        // 1656 iterations at eps = 0.01, slack 0.01, counting two releases
        // per iteration.
        let c = compose_events((0..2 * 1656).map(|_| (0.01, 0.0)), 0.01).unwrap();
        assert!(c.eps_total >= 1.0 && c.eps_total <= 2.0, "{}", c.eps_total);
        // Single-release accounting of the same stream.
        let c1 = compose_events((0..1656).map(|_| (0.01, 0.0)), 0.01).unwrap();
        assert!((c1.eps_sqrt_log - 1.3178).abs() < 1e-3);
        assert!((c1.eps_total - 1.24793).abs() < 1e-3);
    }

    #[test]
    fn delta_accumulates_multiplicatively() {
        let c = compose_events([(0.1, 0.2), (0.1, 0.5)], 0.1).unwrap();
        let expected = 1.0 - 0.9 * 0.8 * 0.5;
        assert!((c.delta_total - expected).abs() < 1e-12);
    }

    #[test]
    fn compose_rejects_bad_slack() {
        assert!(compose_events([(0.1, 0.0)], 0.0).is_err());
        assert!(compose_events([(0.1, 0.0)], 0.5).is_err());
    }

    #[test]
    fn laplace_moments() {
        let mut rng = seeded_rng(5);
        let scale = 0.7;
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_abs = 0.0;
        for _ in 0..n {
            let x = laplace(scale, &mut rng);
            sum += x;
            sum_abs += x.abs();
        }
        let mean = sum / n as f64;
        let mean_abs = sum_abs / n as f64;
        assert!(mean.abs() < 0.01 * scale, "mean {mean}");
        assert!((mean_abs - scale).abs() < 0.01 * scale, "mean|X| {mean_abs}");
    }

    #[test]
    fn laplace_is_deterministic_under_seed() {
        let a: Vec<f64> = {
            let mut rng = seeded_rng(9);
            (0..8).map(|_| laplace(2.0, &mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = seeded_rng(9);
            (0..8).map(|_| laplace(2.0, &mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn exp_mech_single_candidate() {
        let mut rng = seeded_rng(1);
        assert_eq!(exp_mech(&[3.7], 1.0, &mut rng).unwrap(), 0);
    }

    #[test]
    fn exp_mech_zero_epsilon_is_uniform() {
        let mut rng = seeded_rng(2);
        let scores = [100.0, -50.0, 3.0, 0.0];
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[exp_mech(&scores, 0.0, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / 40_000.0;
            assert!((f - 0.25).abs() < 0.02, "freq {f}");
        }
    }

    #[test]
    fn exp_mech_rejects_bad_scores() {
        let mut rng = seeded_rng(4);
        assert!(exp_mech(&[], 1.0, &mut rng).is_err());
        assert!(exp_mech(&[1.0, f64::NAN], 1.0, &mut rng).is_err());
        assert!(exp_mech(&[f64::INFINITY], 1.0, &mut rng).is_err());
    }

    #[test]
    fn exp_mech_two_to_one_odds() {
        // scores [0, ln(3)/eps] -> probabilities [0.25, 0.75].
        let eps = 0.8;
        let scores = [0.0, 3.0f64.ln() / eps];
        let mut rng = seeded_rng(3);
        let mut hits = 0usize;
        let n = 100_000;
        for _ in 0..n {
            if exp_mech(&scores, eps, &mut rng).unwrap() == 1 {
                hits += 1;
            }
        }
        let f = hits as f64 / n as f64;
        assert!((f - 0.75).abs() < 0.01, "freq {f}");
    }

    #[test]
    fn schedule_k_one_collapses() {
        let s = make_schedule(1.0, 0.01, 10, 8, 1, 64).unwrap();
        let expected = 1.0 / (3.0 * std::f64::consts::SQRT_2 * (100.0f64).ln());
        assert!((s.eps_auc - expected).abs() < 1e-12);
        assert_eq!(s.tau, 1);
    }

    #[test]
    fn epoch_epsilons_strictly_decrease() {
        let s = make_schedule(1.0, 0.01, 20, 8, 4, 64).unwrap();
        for l in 1..20 {
            assert!(s.eps_epoch(l) > s.eps_epoch(l + 1));
        }
    }

    #[test]
    fn schedule_stream_composes_under_target() {
        // Self-consistency at (eps=1, dt=0.05, p=50, d=10, K=8, T=d^2):
        // compose each channel's full event stream and stay under target.
        let (eps, dt, p, d, k) = (1.0, 0.05, 50usize, 10usize, 8usize);
        let t = d * d;
        let s = make_schedule(eps, dt, p, d, k, t).unwrap();

        let validation = compose_events((0..2 * t).map(|_| (s.eps_v, 0.0)), dt).unwrap();
        assert!(
            validation.eps_total <= eps,
            "validation channel {}",
            validation.eps_total
        );

        let mut owner_events: Vec<(f64, f64)> = Vec::new();
        for l in 1..=p {
            let e = s.eps_epoch(l);
            owner_events.extend(std::iter::repeat((e, 0.0)).take(2 * t));
        }
        owner_events.extend(std::iter::repeat((s.eps_auc, 0.0)).take(s.tau));
        let owner = compose_events(owner_events, dt).unwrap();
        assert!(owner.eps_total <= eps, "owner channel {}", owner.eps_total);
    }

    #[test]
    fn schedule_validates_inputs() {
        assert!(make_schedule(0.0, 0.01, 10, 8, 2, 64).is_err());
        assert!(make_schedule(1.0, 0.01, 1, 8, 2, 64).is_err());
        assert!(make_schedule(1.0, 0.5, 10, 8, 2, 64).is_err());
    }

    proptest! {
        #[test]
        fn composition_never_exceeds_plain_sum(
            epsilons in proptest::collection::vec(0.0f64..0.5, 1..40)
        ) {
            let c = compose_events(epsilons.iter().map(|&e| (e, 0.0)), 0.01).unwrap();
            prop_assert!(c.eps_total <= c.eps_sum + 1e-12);
        }

        #[test]
        fn appending_events_is_monotone(
            epsilons in proptest::collection::vec(0.0f64..0.5, 1..30),
            extra in 1e-6f64..0.5
        ) {
            let before = compose_events(epsilons.iter().map(|&e| (e, 0.0)), 0.01).unwrap();
            let after = compose_events(
                epsilons.iter().map(|&e| (e, 0.0)).chain([(extra, 0.0)]),
                0.01,
            )
            .unwrap();
            prop_assert!(after.eps_total >= before.eps_total - 1e-12);
        }
    }
}
