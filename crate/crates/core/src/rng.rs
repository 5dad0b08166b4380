//! Deterministic random streams.
//!
//! All randomness in a run flows from a single master seed. Independent
//! consumers (weight init, cubature, shape-space sampling) pull named
//! sub-streams so that paired ablation runs differing in one flag see
//! identical randomness everywhere else.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stream names used by the training/evaluation pipelines.
pub const STREAM_INIT: &str = "init";
pub const STREAM_CUBATURE: &str = "cubature";
pub const STREAM_SHAPE: &str = "shape-space";

/// Derive a reproducible RNG for `(master, name, index)`.
///
/// The derivation hashes the triple, so streams are independent of the order
/// in which they are created.
pub fn stream(master: u64, name: &str, index: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(name.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible() {
        let mut a = stream(7, STREAM_CUBATURE, 0);
        let mut b = stream(7, STREAM_CUBATURE, 0);
        let xs: Vec<f64> = (0..8).map(|_| a.gen()).collect();
        let ys: Vec<f64> = (0..8).map(|_| b.gen()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn streams_differ_by_name_and_index() {
        let mut a = stream(7, STREAM_INIT, 0);
        let mut b = stream(7, STREAM_CUBATURE, 0);
        let mut c = stream(7, STREAM_INIT, 1);
        let x: f64 = a.gen();
        let y: f64 = b.gen();
        let z: f64 = c.gen();
        assert_ne!(x, y);
        assert_ne!(x, z);
    }
}
