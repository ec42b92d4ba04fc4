//! Auditing engine for black-box models.
//!
//! Causal rating metrics (weighted rejection score, average treatment
//! effect, deconfounded impact) are computed for a test model and for two
//! automatically built reference models, one random and one biased, and are
//! combined with post-hoc explainers (partial dependence, Shapley values,
//! counterfactuals) inside question-driven sessions.

pub mod artifact;
pub mod baselines;
pub mod error;
pub mod explain;
pub mod io;
pub mod linalg;
pub mod models;
pub mod plot;
pub mod rating;
pub mod session;
pub mod stats;
pub mod synthetic;
pub mod tabular;
pub mod timeseries;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The crate's only RNG: portable and reproducible from a seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
