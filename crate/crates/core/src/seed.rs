//! Stable seed derivation.
//!
//! Job seeds are a hash of the global seed and the job coordinates, so the
//! schedule (and worker count) never influences a job's random stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Incrementally mixes job coordinates into a 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedBuilder(u64);

impl SeedBuilder {
    pub fn new(seed: u64) -> Self {
        SeedBuilder(splitmix(seed))
    }

    pub fn with_u64(self, v: u64) -> Self {
        SeedBuilder(splitmix(self.0 ^ splitmix(v).rotate_left(17)))
    }

    pub fn with_str(self, s: &str) -> Self {
        self.with_u64(fnv1a(s.as_bytes()))
    }

    pub fn finish(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Convenience: seed derived from a base seed and one numeric coordinate.
pub fn derive(seed: u64, coordinate: u64) -> u64 {
    SeedBuilder::new(seed).with_u64(coordinate).finish()
}

/// Seed for one predictor job.
pub fn job_seed(global: u64, model_id: &str, label: &str, node: u32, k: usize, replicate: u32) -> u64 {
    SeedBuilder::new(global)
        .with_str(model_id)
        .with_str(label)
        .with_u64(node as u64)
        .with_u64(k as u64)
        .with_u64(replicate as u64)
        .finish()
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
