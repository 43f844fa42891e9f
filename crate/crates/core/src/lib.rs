pub mod bodies;
pub mod constants;
pub mod error;
pub mod functionals;
pub mod functions;
pub mod inequalities;
pub mod parallel;
pub mod quadrature;
pub mod zonal;

pub use error::{Error, Result};
