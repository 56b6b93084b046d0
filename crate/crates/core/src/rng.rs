//! Deterministic seed splitting.
//!
//! Every random draw in the crate comes from one 64-bit root seed. A child
//! generator for a `(purpose, index)` pair is a ChaCha8 generator keyed by
//! `seed_from_u64(root)` and switched to stream `(purpose << 32) | index`.
//! ChaCha streams are independent, so children never overlap and the draw
//! sequence of one child does not depend on how many others were created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream namespaces. The numeric codes are part of the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    Workload = 1,
    Trace = 2,
    Bandwidth = 3,
    Realization = 4,
    Instance = 5,
    GateParams = 6,
    Training = 7,
}

pub fn child_rng(root: u64, purpose: Purpose, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(((purpose as u64) << 32) | index as u64);
    rng
}
