use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic random source used throughout the pipeline.
pub type PipelineRng = ChaCha8Rng;

/// Independent stream `stream` of the run seeded with `seed`. Streams are
/// derived by counter, so per-view work can be scheduled in any order.
pub fn stream_rng(seed: u64, stream: u64) -> PipelineRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
