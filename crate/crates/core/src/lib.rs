//! Numerical laboratory for the linearized Boltzmann equation of
//! low-temperature phonons in a Bose condensate.
//!
//! * [`kernels`]: scalar special functions `φ`, `Γ`, `K` and their norms.
//! * [`grid`] and [`operator`]: discretization of the collision operator,
//!   its quadratic form and spectral gap.
//! * [`evolution`]: conservative stiff time integration and decay studies.
//! * [`spherical`]: the 3-D problem through spherical-harmonics modes.
//! * [`acceptance`]: the end-to-end verification suite.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod interp;
pub mod kernels;
pub mod operator;
pub mod quadrature;
pub mod spherical;

pub use error::{Error, Result};
