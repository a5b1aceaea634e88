//! Cross-subject representation alignment and coverage-based sample selection.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the double-precision instantiation used by the CLI and file formats.

pub mod adapters;
pub mod alignment;
pub mod error;
pub mod scalar;
pub mod selection;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Matrix;

pub type Mat = Matrix<f64>;
