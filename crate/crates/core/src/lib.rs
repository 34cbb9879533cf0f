//! Robust bilinear factor analysis of matrix-valued observations with the
//! matrix-variate t distribution.

pub mod distributions;
pub mod error;
pub(crate) mod linalg;
pub mod estimation;
pub mod inference;
pub mod io;
pub mod model;
pub mod selection;
pub mod simbench;

pub use error::{Result, TbfaError};
