//! Numerical laboratory for radial weighted Choquard equations
//! `−Δu + u = |x|^{−α} (|x|^{−α}|u|^p ∗ |x|^{−μ}) |u|^{p−2}u` in `ℝ^N`
//! and for the extremals of the associated weighted Sobolev quotient.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod energy;
pub mod error;
pub mod exponents;
pub mod grid;
pub mod hlslab;
pub mod kernel;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
