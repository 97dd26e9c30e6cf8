//! Counter-based random streams and the deterministic batch executor.
//!
//! Every batch of Monte Carlo samples draws from its own ChaCha8 stream keyed
//! by `(seed, tag)` with the batch index as the stream id, so the variates a
//! batch sees do not depend on which worker runs it. Batch results are merged
//! in index order, which makes every reduction independent of the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Stream = ChaCha8Rng;

/// Stream tags separating independent uses of one seed.
pub mod tags {
    pub const ENERGY_FAR: u64 = 0x0001;
    pub const ENERGY_NEAR: u64 = 0x0002;
    pub const BALL_VOLUME: u64 = 0x0003;
    pub const CENTERS: u64 = 0x0004;
    pub const GAUGE_CONSTANT: u64 = 0x0005;
    pub const PROPERTY: u64 = 0x0006;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: u64, index: u64) -> Stream {
    let mut state = seed ^ tag.rotate_left(32);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Runs `f` on batch indices `0..n_batches` with at most `workers` threads and
/// returns the results in index order.
pub fn run_batches<T, F>(n_batches: u64, workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match workers {
        Some(1) => (0..n_batches).map(&f).collect(),
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(|| (0..n_batches).into_par_iter().map(&f).collect()),
            Err(_) => (0..n_batches).map(&f).collect(),
        },
        None => (0..n_batches).into_par_iter().map(&f).collect(),
    }
}
