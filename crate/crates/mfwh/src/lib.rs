//! Multi-frequency WaveHoltz: simultaneous Helmholtz solves through
//! time-filtered wave-equation evolution.
//!
//! One forced wave solve drives several time filters; the filtered outputs
//! form a fixed-point iteration whose limit solves the discretized
//! Helmholtz problems at each of the requested frequencies. The iteration
//! can be accelerated with matrix-free GMRES, and a spectral predictor
//! estimates the fixed-point contraction rate ahead of time.
//!
//! Module layout:
//! * [`grid`], [`stencil`], [`assemble`] - Cartesian grids, finite
//!   difference Laplacians, boundary closures, banded operator assembly.
//! * [`problem`] - frequencies, sources, and composite wave forcings.
//! * [`wave`] - explicit/implicit time stepping and the time plan.
//! * [`filter`] - time filters, quadrature weights, the filter matrix.
//! * [`driver`] - the fixed-point iteration, GMRES acceleration, and
//!   convergence metrics.
//! * [`analysis`] - convergence-rate predictor and spectrum utilities.
//! * [`reference`] - direct banded solves of the Helmholtz systems.
//! * [`config`], [`runner`], [`fields`] - batch front-end and file output.

pub mod analysis;
pub mod assemble;
pub mod config;
pub mod driver;
pub mod error;
pub mod fields;
pub mod filter;
pub mod grid;
pub mod linalg;
pub mod par;
pub mod problem;
pub mod reference;
pub mod runner;
pub mod stencil;
pub mod wave;

pub use error::{MfwhError, Result};
