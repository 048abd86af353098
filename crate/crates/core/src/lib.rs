//! Subwavelength resonances of high-contrast resonator systems in two dimensions.

pub mod assembly_effective;
pub mod assembly_full;
pub mod asymptotics;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod io_cli;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod solver;
pub mod specfun;

pub use error::{Error, Result};
