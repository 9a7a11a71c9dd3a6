//! Counter-based random streams.
//!
//! Every random draw in this crate is a pure function of
//! `(master seed, trajectory id, step, lane)`. There is no mutable generator
//! state, so a batch of trajectories produces bitwise-identical results no
//! matter how it is scheduled across workers.

/// One splitmix64 finalization round.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Absorb one word into a running key.
#[inline]
fn absorb(state: u64, word: u64) -> u64 {
    mix64(state ^ word.wrapping_mul(GOLDEN).wrapping_add(0x6a09_e667_f3bc_c909))
}

/// A per-trajectory random stream derived from a master seed.
///
/// The stream is stateless: `bits(step, lane)` may be called in any order,
/// from any thread, and always returns the same value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KickStream {
    key: u64,
}

impl KickStream {
    pub fn new(master_seed: u64, trajectory_id: u64) -> Self {
        let key = absorb(absorb(mix64(master_seed ^ GOLDEN), master_seed), trajectory_id);
        KickStream { key }
    }

    /// Raw 64 random bits at position `(step, lane)`.
    #[inline]
    pub fn bits(&self, step: u64, lane: u64) -> u64 {
        mix64(absorb(absorb(self.key, step), lane))
    }

    /// Uniform variate in `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn uniform(&self, step: u64, lane: u64) -> f64 {
        (self.bits(step, lane) >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform variate in `[-1, 1)`.
    #[inline]
    pub fn symmetric(&self, step: u64, lane: u64) -> f64 {
        2.0 * self.uniform(step, lane) - 1.0
    }
}
