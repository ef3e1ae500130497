//! Deterministic RNG stream derivation.
//!
//! Every stochastic component (episode rollouts, plant disturbances, NMPC
//! multistarts) draws from its own stream derived from the master seed and a
//! tag path, so results are independent of thread scheduling and rollout
//! completion order.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent stream from `master` and a tag path such as
/// `[phase, epoch, episode]`.
pub fn stream(master: u64, tags: &[u64]) -> StreamRng {
    let mut state = master ^ 0x853c_49e6_748f_ea9b;
    for &t in tags {
        state = splitmix64(&mut state) ^ t.wrapping_mul(0x2545_f491_4f6c_dd1d);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Standard normal draw via Box-Muller.
pub fn draw_normal(rng: &mut impl Rng) -> f64 {
    // 1 - u maps [0,1) onto (0,1] so the log is finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
