//! Random equilibria of cooperative stochastic systems with a bounded,
//! monotone output nonlinearity, computed through the small-gain fixed
//! point of the input-to-output map.
//!
//! The modules follow the computation: [`model`] describes the system and
//! checks the hypotheses, [`noise`] provides two-sided Wiener paths and the
//! shift, [`dynamics`] integrates forward and pullback, [`gain`] iterates
//! the gain operator to the random equilibrium, and [`stationary`] compares
//! its law with the stationary distribution.

pub mod dynamics;
pub mod error;
pub mod export;
pub mod gain;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod stationary;

pub use error::{Error, Result};
pub use model::{Monotonicity, OutputFunctionSpec, OutputKind, SmallGainReport, SystemSpec};
pub use noise::{NoisePath, PathView};
