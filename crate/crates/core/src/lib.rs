//! Bergman kernels of high tensor powers on a punctured sphere with Poincare cusps,
//! compared against the exact punctured-disc model.

pub mod error;
pub mod geometry_apps;
pub mod basis_lab;
pub mod cli;
pub mod cusp_surface;
pub mod disc_model;
pub mod numerics;

pub use error::{Error, Result};
