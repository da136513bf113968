//! Keyed deterministic random streams.
//!
//! Every random decision in the toolkit draws from a ChaCha8 stream whose key
//! is derived from `(seed, purpose, a, b)`. Two decisions with different keys
//! never share state, so a value drawn for `(layer 3, qubit (1,2))` does not
//! depend on how many other qubits or layers were generated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags separating the sub-streams of one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    OneQubitGates = 1,
    Elision = 2,
    Miscalibration = 3,
    ExactSample = 4,
    MixtureSample = 5,
    Readout = 6,
    TrajectoryErrors = 7,
    TrajectoryDraw = 8,
    TrajectoryReadout = 9,
    FitRestarts = 10,
    Bootstrap = 11,
    Synthetic = 12,
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 256-bit ChaCha key for the sub-stream `(seed, purpose, a, b)`.
pub fn stream_key(seed: u64, purpose: Purpose, a: u64, b: u64) -> [u8; 32] {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ (purpose as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    h = splitmix64(h ^ a.wrapping_mul(0x9FB2_1C65_1E98_DF25));
    h = splitmix64(h ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
    let mut key = [0u8; 32];
    let mut w = h;
    for chunk in key.chunks_mut(8) {
        w = splitmix64(w);
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    key
}

pub fn stream(seed: u64, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_key(seed, purpose, a, b))
}
