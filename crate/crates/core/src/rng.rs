//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from the
//! master seed and a purpose tag, so the order in which clients run never
//! changes what they draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

/// Purposes a stream can be derived for. The discriminant is part of the
/// derivation input, so adding a variant never perturbs existing streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Dataset = 1,
    Partition = 2,
    ModelInit = 3,
    AttackerAssignment = 4,
    Selection = 5,
    ClientRound = 6,
    Surrogate = 7,
    Autoencoder = 8,
}

/// Derives a 64-bit seed from `(master, purpose, a, b)` with SHA-256.
pub fn split_seed(master: u64, purpose: Purpose, a: u64, b: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update([purpose as u8]);
    h.update(a.to_le_bytes());
    h.update(b.to_le_bytes());
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

pub fn stream(master: u64, purpose: Purpose, a: u64, b: u64) -> Stream {
    Stream::seed_from_u64(split_seed(master, purpose, a, b))
}

pub fn from_seed(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}
