//! Estimation of pairwise relationships between long binary event streams.
//!
//! The crate measures how strongly two weighted binary streams move together,
//! using six bounded scores (ham, tmt, cls, cos, cov, dep), and evaluates how
//! well each score recovers the known wiring of randomly generated boolean
//! systems. The `bitrel` binary chains the stages into a pipeline:
//! generate systems, simulate traces, estimate score matrices, soft-score
//! them against the known adjacency, and plot score densities.

mod error;

pub mod bitseries;
pub mod cli;
pub mod eval;
pub mod kde;
pub mod metrics;
pub mod sysgen;

pub use error::{Error, ErrorKind, Result};
