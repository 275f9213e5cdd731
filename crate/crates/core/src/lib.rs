//! Simulation and analysis toolkit for frequency conversion of microwave wave
//! packets by moving current fronts on a nonlinear superconducting line.

pub mod analysis;
pub mod characteristics;
pub mod ddc;
pub mod error;
pub mod experiments;
pub mod fdtd;
pub mod line;
pub mod selftest;
pub mod signal;
pub mod svg;
pub mod types;
pub mod units;

pub use error::{Error, Result};
pub use types::*;
