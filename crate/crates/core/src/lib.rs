//! Hybrid truss-continuum topology optimization for reinforced concrete.
//!
//! Concrete is modelled as a plane-stress Q4 continuum whose stiffness
//! depends on the sign of the local principal stresses; steel is a ground
//! structure of bars whose nodes float freely over the continuum and couple
//! to it through distance-weighted stiffness spreading. Two design modes are
//! provided:
//!
//! - [`Mode::Binary`]: SIMP penalization with density filtering and
//!   Heaviside projection, driving a 0/1 concrete layout.
//! - [`Mode::Vts`]: variable thickness sheet, where filtered densities are
//!   read as out-of-plane thickness and a sigmoid penalization enforces a
//!   minimum printable thickness.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, config parsing
//! and the command-line driver live in the `rcto` companion crate.
#![no_std]
#![warn(missing_docs)]

extern crate alloc;

pub mod aci;
pub mod bimodulus;
pub mod domain;
mod error;
pub mod fea;
pub mod filters;
pub mod gradcheck;
pub mod mma;
pub mod optimizer;
pub mod sparse;
pub mod truss;

pub use domain::{BoundaryConditions, GroundStructure, Mesh, Mode, Problem, RunConfig};
pub use error::{Error, Result};
