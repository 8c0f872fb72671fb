//! Distributed data summarization under differential privacy.
//!
//! A consumer holds a small validation set; `K` data owners hold private
//! datasets. An aggregator assembles a summary of owner points whose squared
//! maximum mean discrepancy (MMD) to the validation set is small, while
//! (a) every release seen by an owner is differentially private with respect
//! to the other owners' data and the validation set, and (b) the aggregator
//! touches as few raw points as possible.
//!
//! The crate is organized around the moving parts of that protocol:
//!
//! - [`data`]: datasets, CSV ingestion, owner splits, synthetic shift
//!   instances.
//! - [`kernel`]: RBF kernel, sample MMD², the normalized summary objective,
//!   exact marginal gains, and the diagonal-dominance condition under which
//!   the objective is monotone submodular.
//! - [`rff`]: the shared random-feature hash (sampled once per run, shared by
//!   value between aggregator and owners).
//! - [`dp`]: stochastic quantization plus the multiplicative-weights private
//!   release of a mean hash vector, with product-form state.
//! - [`privacy`]: Laplace / exponential primitives, the epsilon schedule, and
//!   the adaptive-composition ledger.
//! - [`auction`]: the rank-probabilistic point-request auction with a
//!   forced-request threshold.
//! - [`protocol`]: the full epoch loop wiring the above together.
//! - [`baselines`]: non-private greedy, uniform sampling, brute force.
//! - [`harness`]: seeded experiment runner and metrics emission.

pub mod auction;
pub mod baselines;
pub mod data;
pub mod dp;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod privacy;
pub mod protocol;
pub mod rff;
pub mod rng;

pub use auction::{AuctionParams, AuctionState, Bid};
pub use data::{DataPoint, Dataset, OwnerSplit};
pub use dp::{ProductDistribution, QuantGrid, QuantizedDataset, ReleaseParams};
pub use error::Error;
pub use kernel::KernelParams;
pub use privacy::{Composition, PrivacyEvent, PrivacyLedger, Schedule};
pub use protocol::{BidForm, ParamPlan, ProtocolConfig, SummaryTrace};
pub use rff::{BasisSpec, HashVector, RffBasis};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
