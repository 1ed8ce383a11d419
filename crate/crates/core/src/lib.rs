pub mod dip;
pub mod error;
pub mod harness;
pub mod lowrank;
pub mod matrix;
pub mod metrics;
pub mod neural;
pub mod radar;
pub mod sampling;

pub use error::{Error, Result};
pub use matrix::{ComplexMatrix, Matrix, RealMatrix, Scalar};
