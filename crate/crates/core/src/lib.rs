//! Numerical verification suite for the volume functional on line-bundle connections.

pub mod error;
pub mod exterior;
pub mod field;
pub mod fourier_mukai;
pub mod g2;
pub mod monotonicity;
pub mod pointwise;
pub mod verify;

pub use error::{Error, Result};
