//! Dense optical flow from sparse samples by anisotropic diffusion
//! inpainting on a coarse-to-fine pyramid.

pub mod calibrate;
pub mod error;
pub mod field;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod selfcheck;
pub mod solver;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, ErrorClass, Result};
pub use field::{Field2D, Mask, PyramidLevel};
pub use tensor::{TensorField, ZField};
