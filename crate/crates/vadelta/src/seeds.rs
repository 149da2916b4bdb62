//! Deterministic seed derivation.
//!
//! All randomness in an experiment flows from one master seed. Sub-seeds are
//! derived by hashing the master seed together with a stage name (or a
//! contract id), so any stage can be reproduced in isolation and results do
//! not depend on the order in which stages run or on how work is split
//! across threads.
//!
//! Derivation: `SHA-256("vadelta" || le64(master) || label)`, truncated to
//! the generator seed width. SHA-256 is used for cross-platform stability,
//! not for security.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"vadelta";

fn digest(master: u64, label: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(master.to_le_bytes());
    h.update(label);
    h.finalize().into()
}

/// RNG for a named stage of an experiment.
pub fn stage_rng(master: u64, stage: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(digest(master, stage.as_bytes()))
}

/// A 64-bit sub-seed for a named stage, for APIs that take plain seeds.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    let d = digest(master, stage.as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Path seed for the Monte Carlo valuation of one contract.
///
/// Keyed by `(base_seed, contract_id)` so that per-contract valuations are
/// independent of batch composition and parallel scheduling, and so that the
/// same contract always sees the same paths.
pub fn contract_seed(base_seed: u64, contract_id: u64) -> u64 {
    let mut label = [0u8; 16];
    label[..8].copy_from_slice(b"contract");
    label[8..].copy_from_slice(&contract_id.to_le_bytes());
    let d = digest(base_seed, &label);
    u64::from_le_bytes(d[..8].try_into().unwrap())
}
