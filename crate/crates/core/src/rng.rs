//! Seeded, splittable random streams.
//!
//! Every stochastic routine takes a `Stream`; independent streams are derived
//! from a root seed plus a stream id so that draws are reproducible no matter
//! which thread consumes them.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream `id` of the family rooted at `seed`.
pub fn stream(seed: u64, id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Child stream seeded from the parent's next output.
pub fn split(parent: &mut Stream) -> Stream {
    ChaCha8Rng::seed_from_u64(parent.next_u64())
}
