//! Named, independent random streams derived from one scenario seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Derives the stream for `name`. Streams for different names are
/// independent, so adding a sensor or a bus link never shifts the draws seen
/// by any other stream.
pub fn stream(seed: u64, name: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_name_same_draws() {
        let a: Vec<u64> = stream(7, "sensor:OR-1/tray").random_iter().take(8).collect();
        let b: Vec<u64> = stream(7, "sensor:OR-1/tray").random_iter().take(8).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn names_and_seeds_separate_streams() {
        let a: u64 = stream(7, "bus:cms->mtc").random();
        let b: u64 = stream(7, "bus:mtc->cms").random();
        let c: u64 = stream(8, "bus:cms->mtc").random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
