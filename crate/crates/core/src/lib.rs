//! Ginzburg-Landau energy minimization with a variable applied magnetic field.
//!
//! The crate covers the gauge-covariant discrete functional, construction of
//! the reference potential for a given applied field, reference-cell
//! minimization and the limiting energy density `f_hat(b)` derived from it,
//! ground-state energy prediction, full-domain minimization, and vortex
//! extraction with vorticity measures.

pub mod asymptotics;
pub mod energy;
pub mod error;
pub mod fhat;
pub mod field;
pub mod fieldgen;
pub mod glsolve;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod optim;
pub mod refcell;
pub mod vortex;

pub use energy::{energy, gauge_transform, gradient, EnergyBreakdown, Gradient, Params};
pub use error::{Error, Result};
pub use field::{GaugeField, OrderParameter, ScalarField};
pub use grid::{Grid2D, Region};
pub use num_complex::Complex64;
