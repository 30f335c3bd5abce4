//! Landau-de Gennes model of a spherical colloid in a nematic under a strong
//! external field: tensor algebra, the one-dimensional layer problem, the
//! axisymmetric solver, explicit trial fields and a sweep harness.

pub mod axisym;
pub mod error;
pub mod harness;
pub mod lbfgs;
pub mod profile;
pub mod qtensor;
pub mod quad;
pub mod trial;
pub mod util;

pub use error::{Error, Result};
pub use profile::kappa;
pub use qtensor::{Director, ModelParams, QTensor};
