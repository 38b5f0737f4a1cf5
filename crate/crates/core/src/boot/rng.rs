//! Random substreams.
//!
//! Every random draw comes from a ChaCha8 stream keyed by
//! `(seed, index, purpose)`, so results do not depend on the order in which
//! replications are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Continuation noise for the observed-data statistics.
    ObservedNoise = 0,
    /// Outcomes of a bootstrap sample.
    BootData = 1,
    /// Continuation noise of a bootstrap sample.
    BootNoise = 2,
    /// Regressor path of a Monte Carlo replication.
    McRegressor = 3,
    /// Outcomes of a Monte Carlo replication.
    McData = 4,
    /// Continuation noise of a Monte Carlo replication.
    McNoise = 5,
}

const PURPOSES: u64 = 8;

pub fn substream(seed: u64, index: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_mul(PURPOSES).wrapping_add(purpose as u64));
    rng
}

/// Mixes a master seed with two labels (SplitMix64 finalizer).
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut z = master
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F).rotate_left(31);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
