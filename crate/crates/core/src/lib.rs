//! Structure-preserving finite element discretisation of incompressible
//! resistive MHD on the lowest-order discrete de Rham complex.

pub mod assembly;
pub mod cli;
pub mod derham;
pub mod diagnostics;
pub mod error;
pub mod fem_spaces;
pub mod fields;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod verification;

pub use error::{Error, Result};
