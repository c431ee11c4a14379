//! Spectral Galerkin exponential Euler simulation of the stochastic
//! Allen–Cahn equation on `(0, 1)` with Dirichlet boundary conditions, and
//! exact strong errors for the linear stochastic heat equation.

// `!(x > 0.0)` style guards reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linear_errors;
pub mod noise;
pub mod nonlinearity;
pub mod numeric;
pub mod scheme;
pub mod spectral;

pub use error::{Error, Result};
