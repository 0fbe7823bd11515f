//! Seeded random streams.
//!
//! Every randomized subsystem draws from its own ChaCha8 stream derived from
//! the user seed, so adding draws in one stage never shifts another stage:
//!
//! | stream | subsystem |
//! |--------|-----------|
//! | 0 | scrambling (permutation and rotations) |
//! | 1 | connected-component repair tie-breaks |
//! | 2 | placement tie-breaks |
//! | 3 | eigensolver start vectors |
//! | 4 | synthetic image generation |
//! | 5 | test harnesses (perturbation, corpus selection) |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scramble = 0,
    Connect = 1,
    Placement = 2,
    Eigensolver = 3,
    Synthetic = 4,
    Harness = 5,
}

pub fn stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
