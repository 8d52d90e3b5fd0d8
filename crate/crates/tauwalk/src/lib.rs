//! Exact combinatorics of random-turn walks on partitions.
//!
//! Configurations are partitions viewed as Maya diagrams (a 1D lattice gas).
//! Transition weights of the walks are Schur values, signed path sums of
//! gl(∞) graph operators, or determinants of one-particle kernels; the crate
//! computes each of them by at least two independent routes.

pub mod cli;
pub mod error;
pub mod glinf;
pub mod layering;
pub mod numeric;
pub mod partition;
pub mod potential;
pub mod random_turn;
pub mod report;
pub mod vicious;
pub mod schur;

pub use error::{Error, Result};
pub use partition::{MayaDiagram, Orientation, Partition};
pub use potential::Potential;
