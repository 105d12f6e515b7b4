//! Trajectory distributions for robot motion: probabilistic movement
//! primitives with robust MAP training and fast adaptation operators.
//!
//! A movement primitive is stored as a Gaussian over basis-function weight
//! vectors. Training fits that Gaussian to demonstrated trajectories with an
//! EM algorithm, optionally regularized by a Normal-Inverse-Wishart prior
//! that keeps covariance estimates well conditioned when only a handful of
//! demonstrations are available. Adaptation conditions the learned
//! distribution on joint-space or task-space targets without re-training.
//!
//! The crate is `no_std` (with `alloc`) so the conditioning operators can run
//! inside real-time control loops; file formats and the CLI live in the
//! companion `promp-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adaptation;
pub mod basis;
pub mod error;
pub mod gaussian;
pub mod kinematics;
mod linalg;
pub mod model;
pub mod tabletennis;
pub mod training;

pub use basis::{BasisConfig, Order};
pub use error::{Error, Result};
pub use gaussian::GaussianState;
pub use model::{Demonstration, ProMP};
