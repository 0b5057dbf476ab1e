//! Seeded, splittable random streams and the deterministic chunked
//! parallel map the estimators are built on.
//!
//! The sample index space is partitioned into fixed-size chunks; chunk k
//! owns the ChaCha streams derived from (seed, k), and partial results
//! are reduced in chunk order. The partition and the streams depend only
//! on the seed and the sample count, so results are bit-identical at any
//! worker-thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per chunk. Big enough to amortize scheduling, small enough
/// to parallelize the sample counts used in practice.
pub(crate) const CHUNK_SAMPLES: usize = 16_384;

/// The RNG stream for a given (seed, stream index) pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits `n_samples` into chunks and runs `work(chunk_index, len)` for
/// each, in parallel when `threads` allows, returning results in chunk
/// order.
pub(crate) fn run_chunks<T, F>(n_samples: usize, threads: Option<usize>, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, usize) -> T + Sync,
{
    let n_chunks = n_samples.div_ceil(CHUNK_SAMPLES);
    let len_of = |k: usize| {
        if k + 1 == n_chunks {
            n_samples - k * CHUNK_SAMPLES
        } else {
            CHUNK_SAMPLES
        }
    };
    let run = || {
        (0..n_chunks)
            .into_par_iter()
            .map(|k| work(k as u64, len_of(k)))
            .collect::<Vec<T>>()
    };
    match threads {
        Some(1) => (0..n_chunks).map(|k| work(k as u64, len_of(k))).collect(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(run),
        None => run(),
    }
}
