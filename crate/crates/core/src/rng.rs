//! Seeded random streams. One master seed fans out into independent named
//! streams so that, for example, two algorithms run on the same seed see the
//! same exploration coins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamId {
    Coins,
    Rademacher,
    Instance,
    Oracle,
    Bandit,
    Rounding,
    Audit,
    Restarts,
}

impl StreamId {
    fn id(self) -> u64 {
        match self {
            StreamId::Coins => 1,
            StreamId::Rademacher => 2,
            StreamId::Instance => 3,
            StreamId::Oracle => 4,
            StreamId::Bandit => 5,
            StreamId::Rounding => 6,
            StreamId::Audit => 7,
            StreamId::Restarts => 8,
        }
    }
}

pub fn stream(seed: u64, which: StreamId) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}

/// A uniform draw from `{-1, +1}`.
pub fn rademacher<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}
