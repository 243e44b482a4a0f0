//! Run configuration, field and log export, and design extraction.

pub mod config;
pub mod contour;
pub mod field;
pub mod vtk;

pub use config::{Length, RunConfig};
pub use contour::{extract_contour, signed_area, ContourSet};
pub use field::{export_csv, read_field, write_field};
pub use vtk::{cell_to_point, VtkGrid};
