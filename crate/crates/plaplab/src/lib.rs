//! Finite-difference laboratory for finite-time blow-up in the p-Laplacian
//! reaction-diffusion problem
//!
//! ```text
//! u_t = div(|grad u|^(p-2) grad u) + f(u)   in Omega,
//! u = 0 on the boundary,  u(.,0) = u0 >= 0,  p >= 2,
//! ```
//!
//! on an interval or an axis-aligned rectangle. The crate provides the
//! conservative (flux-form) discrete operator together with its exact
//! summation-by-parts energy pairing, a first-eigenpair solver for the
//! Dirichlet p-Laplacian, structural growth checks on the reaction term f,
//! the energy and concavity functionals used to certify blow-up and bound
//! the blow-up time, an adaptive explicit time integrator with blow-up
//! detection, and a small CLI for reproducible experiments and parameter
//! sweeps.

pub mod config;
pub mod conditions;
pub mod eigen;
pub mod experiment;
pub mod functionals;
pub mod grid;
mod linalg;
pub mod plap;
pub mod solver;
pub mod source;
pub mod sweep;
pub mod util;

use thiserror::Error;

pub use grid::{Field, Grid};
pub use plap::PExponent;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("initial energy J(0) = {0:.6e} is not positive; no blow-up bound applies")]
    NoBound(f64),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
