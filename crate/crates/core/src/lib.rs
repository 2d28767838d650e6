//! Fidelity estimation for bipartite qudit Bell-type states from local
//! measurements in modified Heisenberg-Weyl eigenbases.
//!
//! The crate is organised bottom-up: [`numerics`] holds the complex linear
//! algebra, [`states`] and [`measurements`] build targets, noisy inputs and
//! outcome statistics, [`verifiers`] assembles verification operators, and
//! [`estimation`] turns expectation values into fidelity bounds.

pub mod error;
pub mod estimation;
pub mod measurements;
pub mod numerics;
pub mod states;
pub mod verifiers;

#[cfg(test)]
pub(crate) mod test_util;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
