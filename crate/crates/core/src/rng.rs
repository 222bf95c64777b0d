//! Reproducible random streams.
//!
//! ChaCha is counter based: a (seed, stream) pair addresses an independent
//! keystream, so every consumer derives its own generator from a
//! [`StreamKey`] without coordinating with the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Interarrival = 0,
    Routing = 1,
    JobSize = 2,
    Restart = 3,
    Instance = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub replication: u32,
    pub class: u16,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(replication: u32, class: u16, purpose: Purpose) -> Self {
        Self {
            replication,
            class,
            purpose,
        }
    }

    fn id(self) -> u64 {
        (u64::from(self.replication) << 32) | (u64::from(self.class) << 8) | self.purpose as u64
    }
}

pub fn stream(seed: u64, key: StreamKey) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key.id());
    rng
}
