//! Seeding discipline.
//!
//! Every random choice in the crate flows through a ChaCha12 generator seeded
//! from a `u64`. ChaCha12 is fully specified and platform independent, so a
//! run is reproducible from its master seed alone. Sub-streams (basis
//! sampling, each private release, the auction, instance generation) get
//! their own seeds derived with a SplitMix64 mix of the master seed and a
//! stream id, which keeps streams independent of call order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream ids for the protocol's derived seeds.
pub mod stream {
    pub const BASIS: u64 = 1;
    pub const SEED_SET: u64 = 2;
    pub const RELEASE_VALIDATION: u64 = 3;
    pub const AUCTION: u64 = 4;
    pub const INSTANCE: u64 = 5;
    pub const UNIFORM_BASELINE: u64 = 6;
    /// Epoch `l` release uses `RELEASE_EPOCH_BASE + l`.
    pub const RELEASE_EPOCH_BASE: u64 = 1000;
}

/// SplitMix64 finalizer (Steele, Lea, Flood; public domain reference mix).
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for a named sub-stream of `master`.
pub fn derive_seed(master: u64, stream_id: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream_id))
}

/// The one generator used everywhere.
pub fn seeded_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
