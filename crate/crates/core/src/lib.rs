//! Random-matrix simulations of energy spreading in driven chaotic systems.

pub mod analysis;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
