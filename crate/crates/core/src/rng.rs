// SPDX-License-Identifier: Apache-2.0

//! Counter-based random streams.
//!
//! Every random quantity is addressed by `(seed, domain, counter)`: the seed
//! and domain select a ChaCha8 key, the counter selects the ChaCha stream.
//! Environment level `n` and walk index `i` are counters, so any level or
//! walk can be regenerated independently of query order or thread layout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains never share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Environment = 0x656e_7669_726f_6e31,
    Walk = 0x7761_6c6b_6572_7331,
    WalkSeed = 0x7365_6564_7370_6c74,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key(seed: u64, domain: Domain) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut state = mix64(seed ^ domain as u64);
    for chunk in out.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    out
}

/// Maps ℤ onto ℕ bijectively (0, -1, 1, -2, 2, ... → 0, 1, 2, 3, 4, ...).
pub fn zigzag(n: i64) -> u64 {
    ((n << 1) ^ (n >> 63)) as u64
}

/// The stream that generates environment level `n` under `seed`.
pub fn level_stream(seed: u64, n: i64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key(seed, Domain::Environment));
    rng.set_stream(zigzag(n));
    rng
}

/// Seed of walk `index` in an ensemble rooted at `base_seed`.
pub fn walk_seed(base_seed: u64, index: u64) -> u64 {
    mix64(mix64(base_seed ^ Domain::WalkSeed as u64).wrapping_add(index))
}

/// The stream driving a single walk.
pub fn walk_stream(walk_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(key(walk_seed, Domain::Walk))
}
