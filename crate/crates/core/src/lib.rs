//! Spectral-Galerkin simulation of two-dimensional channel shear flow with a
//! nonmonotone, multivalued (Clarke subdifferential) law on the bottom wall.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] and [`basis`] build the periodic channel, a divergence-free
//!   stream-function basis and its mass, stiffness and trace matrices.
//! * [`potential`], [`mollifier`] and [`certify`] describe the superpotential,
//!   its Clarke interval, the mollified selection used by the scheme and the
//!   growth/dissipativity constants.
//! * [`operators`] assembles the Stokes operator, the Lamb-form trilinear
//!   tensor, the boundary lift and its forcing.
//! * [`simulate`] and [`constants`] integrate the regularized Galerkin system
//!   and audit every constant entering the a-priori estimates.
//! * [`attractor`] implements the shift semigroup, windowed trajectory norms
//!   and the absorbing-ball diagnostics.
//! * [`config`], [`cache`] and [`cli`] are the batch front end.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod attractor;
pub mod basis;
pub mod cache;
pub mod certify;
pub mod config;
pub mod constants;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod mollifier;
pub mod operators;
pub mod potential;
pub mod quadrature;
pub mod setup;
pub mod simulate;

#[cfg(feature = "cli")]
pub mod cli;
#[cfg(feature = "cli")]
pub mod plot;

pub use error::{Error, Result};

/// Order-preserving map, parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn par_map<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    items.iter().map(f).collect()
}
