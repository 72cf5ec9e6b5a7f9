//! Reproducible random streams derived from one master seed.
//!
//! Every stream is a ChaCha8 generator addressed by a path of integers. All but
//! the last path element are folded into the 256-bit key together with the
//! master seed; the last element selects the ChaCha stream id. Generating from
//! one stream never advances another, so adding chains or runs leaves every
//! existing stream bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep different subsystems from ever sharing a stream.
pub mod domain {
    pub const HEBBIAN: u64 = 0x4845_4242;
    pub const DATASET: u64 = 0x4441_5441;
    pub const SPLIT: u64 = 0x5350_4c54;
    pub const WEIGHTS: u64 = 0x5745_4947;
    pub const CHAIN: u64 = 0x4348_4149;
    pub const SPHERE: u64 = 0x5350_4845;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// The generator addressed by `path`. An empty path is stream 0 of the
    /// master key.
    pub fn stream(&self, path: &[u64]) -> StreamRng {
        let (prefix, id) = match path.split_last() {
            Some((last, rest)) => (rest, *last),
            None => (&[][..], 0),
        };
        let mut key = [0u8; 32];
        let mut state = splitmix64(self.master);
        for &p in prefix {
            state = splitmix64(state ^ splitmix64(p));
        }
        for chunk in key.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(id);
        rng
    }
}

/// One standard normal draw converted to `S`.
#[inline]
pub fn standard_normal<S: Scalar, R: rand::Rng + ?Sized>(rng: &mut R) -> S {
    let z: f64 = StandardNormal.sample(rng);
    S::lit(z)
}
