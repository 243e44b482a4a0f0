//! Topology optimization of pressure-actuated compliant mechanisms.
//!
//! Pressure loads are modelled with a Darcy flow field whose flow and
//! drainage coefficients depend on the material density, so the load moves
//! with the evolving design. Designs are described by the robust three-field
//! formulation (eroded, intermediate and dilated projections of one filtered
//! design field) and optimized in a min-max sense with the method of moving
//! asymptotes. Extracted designs can be checked with a geometrically
//! nonlinear neo-Hookean solver under follower pressure loads.

pub mod darcy;
pub mod elasticity;
pub mod error;
pub mod fields;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod mma;
pub mod nlfea;
pub mod optimizer;
pub mod sensitivity;

pub use error::{Error, Result};
