//! Correlation networks and information flows between their communities.
//!
//! The pipeline runs in six stages, each in its own module:
//!
//! - [`ingest`]: price panels from CSV, log-returns on a ragged calendar
//! - [`spectral`]: correlation matrices, eigen-decomposition, Wishart noise
//!   bounds and the sector-mode correlation
//! - [`netfilter`]: MST and PMFG backbones over the distance `1 - C`
//! - [`community`]: two-level map-equation community detection
//! - [`infodyn`]: symbolization, Shannon/Rényi entropies and transfer entropies
//! - [`flows`]: community-averaged effective TE with shuffle significance
//!
//! [`pipeline`] wires the stages together and writes the artifact set.

pub mod community;
pub mod error;
pub mod flows;
pub mod infodyn;
pub mod ingest;
pub mod netfilter;
pub mod pipeline;
pub mod seeds;
pub mod spectral;
pub mod synthetic;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
