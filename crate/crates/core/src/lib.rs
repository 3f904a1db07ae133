//! Ideal field dislocation mechanics (and, by row embedding, ideal MHD) on
//! the periodic unit cube, together with a concave dual formulation whose
//! maximizers map back to primal solutions.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`]: periodic grid, fields and differential operators.
//! * [`primal`]: fluxes, residuals and conserved quantities of the primal system.
//! * [`integrator`]: pseudo-spectral RK4 forward solver producing base states.
//! * [`algebra`]: constant tables of the packed Lagrangian and the per-point matrix K.
//! * [`dtp`]: the per-point dual-to-primal solve.
//! * [`dual`]: space-time dual objective, gradient and maximizer.
//! * [`io`], [`scenarios`], [`commands`], [`check`]: configuration, persistence
//!   and the command-line drivers.

pub mod algebra;
pub mod check;
pub mod commands;
pub mod dtp;
pub mod dual;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod io;
pub mod primal;
pub mod scenarios;

pub use error::{Error, Result};
pub use grid::{Backend, Field, PeriodicGrid};
pub use primal::PrimalState;
