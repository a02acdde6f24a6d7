//! Purified pseudomode models for non-Markovian open quantum systems.

pub mod corrlib;
pub mod csvio;
pub mod dynamics;
pub mod error;
pub mod heom;
pub mod linalg;
pub mod liouville;
pub mod modelgen;
pub mod oracle;
pub mod scenario;
pub mod sparse;
pub mod validation;
pub mod waveguide;

pub use corrlib::{CorrelationKey, CorrelationSet, ExpTerm, TimeSign};
pub use error::{Error, Result};
pub use num_complex::Complex64;
