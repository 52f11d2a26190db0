//! Nuclearity and compactness of weighted conditional expectation (WCE)
//! operators `T = M_w E M_u` between `L^p` and `L^q` over discrete measure
//! spaces.
//!
//! The crate is layered bottom-up:
//!
//! - [`measure`]: atomic spaces, partitions into blocks, weights, integration.
//! - [`condexp`]: the conditional expectation `E` as blockwise averaging.
//! - [`wce`]: the operator itself, its rank-one decomposition and per-atom
//!   statistics.
//! - [`criteria`]: three-valued nuclearity and compactness verdicts.
//! - [`asymptotic`]: countable atom families with certified tail bounds.
//! - [`oracle`]: independent brute-force checks (block norms, norm ascent,
//!   singular values, test-function identities).
//! - [`cli`]: config ingestion and report emission for the `wce` binary.

pub mod asymptotic;
pub mod cli;
pub mod condexp;
pub mod criteria;
mod error;
pub mod expr;
pub mod measure;
pub mod oracle;
pub mod sum;
pub mod wce;

pub use error::{Error, Result};
