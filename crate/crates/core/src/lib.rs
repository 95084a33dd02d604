//! Particle pile-up energies for the kernel `K(x) = -log|tanh x|`.
//!
//! The crate minimizes the discrete interaction energy of `n` ordered
//! particles, solves the continuum equilibrium-measure problem on a grid, and
//! evaluates the inequalities that relate the two.

pub mod analysis;
pub mod bounds;
pub mod continuum;
pub mod discrete;
pub mod error;
pub mod integrals;
pub mod kernelsplit;
pub mod potentials;
pub mod quad;
pub mod scaling;

pub use error::{Error, Result};
