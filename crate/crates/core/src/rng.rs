//! Named random substreams derived from one root seed.
//!
//! Every consumer of randomness (data generation, parameter init, rollouts)
//! asks for its own stream so that re-seeding one component never shifts the
//! draws seen by another, and so that per-sample streams do not depend on
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed for the stream `name` / `path` under `root`.
pub fn derive_seed(root: u64, name: &str, path: &[u64]) -> u64 {
    let mut h = splitmix(root ^ fnv1a(name));
    for &p in path {
        h = splitmix(h ^ splitmix(p));
    }
    h
}

pub fn substream(root: u64, name: &str, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(root, name, path))
}
