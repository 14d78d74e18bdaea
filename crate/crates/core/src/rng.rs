//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, replica, step)`: the seed fixes the
//! ChaCha key, the replica selects the 64-bit stream and the step selects a
//! disjoint window of the keystream. Results therefore do not depend on the
//! order in which replicas or steps are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Keystream words reserved per step (2^32 words).
const STEP_WINDOW_BITS: u32 = 32;

/// Domain tags separating unrelated uses of one global seed.
pub mod domain {
    pub const DYNAMICS: u64 = 0x5348_455f_4459_4e41;
    pub const QUADRATURE: u64 = 0x5155_4144_5241_5455;
    pub const NOISE_CHECK: u64 = 0x4e4f_4953_455f_4348;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key_for(seed: u64, domain: u64) -> [u8; 32] {
    let mut state = seed ^ domain;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Identifies one replica's family of streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub domain: u64,
    pub replica: u64,
}

impl StreamKey {
    pub fn new(seed: u64, domain: u64, replica: u64) -> Self {
        Self {
            seed,
            domain,
            replica,
        }
    }

    /// Generator positioned at the start of `step`'s window.
    pub fn at_step(&self, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(key_for(self.seed, self.domain));
        rng.set_stream(self.replica);
        rng.set_word_pos((step as u128) << STEP_WINDOW_BITS);
        rng
    }
}
