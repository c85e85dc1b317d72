//! Convolved action functionals for damped dynamical systems.
//!
//! Modules, from the bottom up:
//! - [`grid`]: uniform grids, sampled signals, trapezoid convolution.
//! - [`fracops`]: Riemann–Liouville integrals and derivatives.
//! - [`identities`]: residual checks of the fractional integration-by-parts relations.
//! - [`models`]: SDOF/MDOF models, closed-form and state-space reference solutions.
//! - [`actions`]: action functionals, first variations and Euler–Lagrange residuals.
//! - [`stationarity`]: assembly and solution of the discrete stationarity conditions.

pub mod actions;
pub mod error;
pub mod fracops;
pub mod grid;
pub mod identities;
pub mod io;
pub mod models;
pub mod special;
pub mod stationarity;

pub use error::{Error, Result};
