//! Simulation and verification toolkit for doubly nonlinear anisotropic
//! diffusion `∂ₜ(|u|^{α−1}u) = Σᵢ ∂ᵢ(|∂ᵢu|^{pᵢ−2}∂ᵢu)`.

pub mod analysis;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod oracle;
pub mod params;
pub mod solver;

pub use diagnostics::TimeSeriesRecord;
pub use error::*;
pub use grid::{GridFunction, GridSpec};
pub use params::{derive, Anisotropy, DerivedExponents, RegimeFlags};
pub use solver::{InitialDatum, SolverConfig};
