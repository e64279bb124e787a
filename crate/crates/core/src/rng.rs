//! Deterministic random streams.
//!
//! One root seed fixes the ChaCha key; every task draws from its own stream
//! selected by a task path (e.g. `[criterion, block]`). ChaCha is a
//! counter-based generator, so the stream a task receives does not depend on
//! which thread runs it or in what order tasks complete.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream factory keyed by a root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    root: u64,
}

impl Streams {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// Generator for the task identified by `path`.
    pub fn stream(&self, path: &[u64]) -> StreamRng {
        let mut id = 0x5EED_u64;
        for &p in path {
            id = splitmix64(id ^ p);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.root);
        rng.set_stream(id);
        rng
    }

    /// Sub-factory whose streams are all prefixed by `tag`.
    pub fn derive(&self, tag: u64) -> Streams {
        Streams {
            root: splitmix64(self.root ^ splitmix64(tag)),
        }
    }
}

/// Splits `total` items into `parts` contiguous blocks; returns block sizes.
pub fn partition(total: usize, parts: usize) -> Vec<usize> {
    let parts = parts.max(1).min(total.max(1));
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|b| base + usize::from(b < extra)).collect()
}
