//! Seeded random streams.
//!
//! Every random decision in training is drawn from a ChaCha stream whose
//! seed is derived from the run seed and a few integer coordinates, so the
//! same `(seed, epoch, example)` always replays the same masks and
//! code-switches regardless of which loss components are enabled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags for derived streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Mask = 3,
    CodeSwitch = 4,
    Synthetic = 5,
    GradCheck = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a stream tag and coordinates into a new 64-bit seed.
pub fn derive_seed(seed: u64, stream: Stream, coords: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ (stream as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    for &c in coords {
        h = splitmix64(h ^ c);
    }
    h
}

pub fn stream(seed: u64, stream: Stream, coords: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream, coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, Stream::Mask, &[1, 2]).random();
        let b: u64 = stream(7, Stream::Mask, &[1, 2]).random();
        let c: u64 = stream(7, Stream::CodeSwitch, &[1, 2]).random();
        let d: u64 = stream(7, Stream::Mask, &[2, 1]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
