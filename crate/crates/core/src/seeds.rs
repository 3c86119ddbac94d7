//! Deterministic sub-seed fan-out from a single configured seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Streams that consume randomness. Each gets a disjoint sub-seed space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Community = 1,
    Shuffle = 2,
    Synthetic = 3,
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Base seed for a stream; pair/attempt indices are then xor-ed in.
pub fn stream_seed(seed: u64, stream: Stream) -> u64 {
    mix(seed ^ mix(stream as u64))
}

/// Sub-seed for item `index` of a stream: `stream_seed ^ index`.
pub fn sub_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    stream_seed(seed, stream) ^ index
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ() {
        assert_ne!(
            stream_seed(7, Stream::Community),
            stream_seed(7, Stream::Shuffle)
        );
        assert_eq!(
            sub_seed(7, Stream::Shuffle, 0),
            stream_seed(7, Stream::Shuffle)
        );
    }
}
