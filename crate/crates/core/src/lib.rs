//! Nodal (sign-changing) semiclassical standing waves concentrating on
//! spheres, computed by cylindrical reduction and a penalized variational
//! scheme.

pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod limit;
pub mod linalg;
pub mod nonlinearity;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
