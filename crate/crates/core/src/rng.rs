//! Deterministic RNG substreams.
//!
//! Every random draw in this crate comes from a ChaCha8 stream whose 32-byte
//! key is the tuple `(master_seed, stream_kind, a, b)` laid out verbatim.
//! The mapping from tuple to key is injective, so distinct (walker,
//! iteration) pairs can never collide, and a run is reproducible from its
//! master seed alone regardless of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream kinds. Keeping them in one place avoids accidental reuse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Initial walker positions; `a` = walker index.
    Init = 1,
    /// Stretch-move draws; `a` = iteration, `b` = walker index.
    Move = 2,
    /// Continuous-time event clock and move draws.
    Events = 3,
    /// Metropolis baseline chain; `a` = chain index.
    Metropolis = 4,
    /// Auxiliary throwaway runs (tangent probes, profile repetitions).
    Aux = 5,
}

/// Derive the ChaCha8 substream for `(master, stream, a, b)`.
pub fn substream(master: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master.to_le_bytes());
    seed[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    seed[16..24].copy_from_slice(&a.to_le_bytes());
    seed[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Derive a fresh 64-bit seed for a child task (replicate runs, auxiliary
/// chains) so that its own substreams cannot collide with the parent's.
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    use rand::RngCore;
    substream(master, stream, index, u64::MAX).next_u64()
}
