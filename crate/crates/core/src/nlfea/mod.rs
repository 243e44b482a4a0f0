//! Geometrically nonlinear neo-Hookean verification of extracted designs
//! under follower pressure.

pub mod follower;
pub mod material;
pub mod solver;
pub mod structure;

pub use follower::{edge_load, follower_load, FollowerBoundary};
pub use material::{cauchy_stress, plane_stress, strain_energy, HyperelasticParams};
pub use solver::{
    internal_force, linear_response, pressure_sweep, LoadStep, NewtonSettings, NonlinearModel, NonlinearResult,
    SweepTable,
};
pub use structure::{extract_design, Extraction, Structure};
