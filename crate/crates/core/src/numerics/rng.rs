//! Seeded, labelled random streams.
//!
//! A [`SeedStream`] is a plain value. Consumers derive child streams by label or
//! index, so independent pieces of a computation never share generator state and
//! results do not depend on evaluation order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    key: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix64(seed),
        }
    }

    /// Child stream identified by a label.
    pub fn derive(&self, label: &str) -> Self {
        // FNV-1a over the label, folded into the parent key
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        Self {
            key: splitmix64(self.key ^ splitmix64(h)),
        }
    }

    /// Child stream identified by an index (trial number, batch number, ...).
    pub fn derive_index(&self, index: u64) -> Self {
        Self {
            key: splitmix64(self.key.rotate_left(17) ^ splitmix64(index.wrapping_add(0x5851_F42D))),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key)
    }
}

/// `count` iid standard normal draws from `stream`.
pub fn std_normal_sample(stream: &SeedStream, count: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..count).map(|_| rng.sample(StandardNormal)).collect()
}

/// Fill `out` with standard normal draws from an existing generator.
pub fn fill_std_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
}
