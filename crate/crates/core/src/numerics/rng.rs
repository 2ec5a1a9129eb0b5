//! Deterministic random streams keyed by seed, replication and purpose.
//!
//! Each `(master_seed, replication, purpose)` triple maps to its own ChaCha20
//! key, so results do not depend on thread count or on the order in which
//! replications are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Phase1,
    Phase2,
    Init,
    Subsample,
    Other(u32),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Phase1 => 1,
            Purpose::Phase2 => 2,
            Purpose::Init => 3,
            Purpose::Subsample => 4,
            Purpose::Other(k) => 0x1000 + k as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replication: u64,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(master_seed: u64, replication: u64, purpose: Purpose) -> Self {
        StreamKey { master_seed, replication, purpose }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.replication.to_le_bytes());
        seed[16..24].copy_from_slice(&self.purpose.tag().to_le_bytes());
        seed[24..].copy_from_slice(b"2phaseEL");
        ChaCha20Rng::from_seed(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let k = StreamKey::new(42, 7, Purpose::Phase1);
        let a: Vec<u64> = k.rng().random_iter().take(4).collect();
        let b: Vec<u64> = k.rng().random_iter().take(4).collect();
        assert_eq!(a, b);
        let c: Vec<u64> = StreamKey::new(42, 7, Purpose::Phase2).rng().random_iter().take(4).collect();
        let d: Vec<u64> = StreamKey::new(42, 8, Purpose::Phase1).rng().random_iter().take(4).collect();
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
