//! Lattice scalar field theory in hyperspherical coordinates.
//!
//! Every lattice field configuration `φ` is split into a single radius
//! `κ = ‖φ‖` and a direction field `η` on the unit sphere `S^{N-1}`. The
//! crate evaluates the lattice action in both coordinate systems, samples the
//! functional integral with and without the radial Jacobian `κ^{N-1}`,
//! measures how perturbative insertions scale with the site count `N` and the
//! spacing `a`, and provides the generalized-Poisson sharp-time toolkit.

pub mod action;
pub mod config;
pub mod error;
pub mod hypersphere;
pub mod lattice;
pub mod poisson;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod scaling;
pub mod stats;

pub use error::{Error, Result};
