//! Numerical solution of homogeneous and non-homogeneous renewal equations, with
//! waiting-time distributions built directly from insurance claim records.

pub mod convolution;
pub mod empirical;
pub mod error;
pub mod fixtures;
pub mod format;
pub mod grid;
pub mod quadrature;
pub mod report;
pub mod selftest;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{MatrixKind, TimeGrid, TwoTimeMatrix};
pub use quadrature::QuadratureRule;
