//! Finite-volume laboratory for the eigensystem multiscale analysis of the
//! Anderson model in energy intervals.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: lattice boxes, boundaries, interiors, suitable covers and
//!   buffered subsets.
//! * [`operator`]: disorder sampling and assembly of `H = -Δ + V` on finite
//!   regions, restrictions and the boundary coupling.
//! * [`spectral`]: eigensystems, level spacing, the modulating function and
//!   localization verdicts.
//! * [`calculus`]: functional calculus on eigensystems and the associated
//!   decay-bound checks.
//! * [`exponents`]: the exponent constraint system and scale schedules.
//! * [`harness`]: Monte Carlo experiments, configuration and persistence.

pub mod calculus;
pub mod error;
pub mod exponents;
pub mod geometry;
pub mod harness;
pub mod operator;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use exponents::ExponentSet;
pub use geometry::{LatticeBox, Site, SiteSet};
pub use operator::{DisorderSpec, FiniteHamiltonian, Potential};
pub use spectral::{EnergyInterval, Eigensystem, LocalizationVerdict};
