//! Multi-agent adversarial generation of privacy-preserving synthetic tabular data.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numeric piece of the
//! system: a small tensor/neural-network substrate, k-means partitioning, the
//! generator and discriminator agents, the adversarial trainer with its
//! equilibrium probe, and the realism/utility/privacy metrics. File formats,
//! CSV ingestion and the command line live in the `hydragan` companion crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod datapipe;
pub mod error;
pub mod evaluator;
pub mod math;
pub mod networks;
pub mod numcore;
pub mod rng;
pub mod toy;
pub mod trainer;

pub use error::{Error, Result};
