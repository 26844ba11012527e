//! Zero-shot single-image super-resolution: a small image-specific
//! convolutional network trained at test time on example pairs drawn from
//! the input image alone, plus the resampling, degradation and scoring
//! machinery needed to benchmark it under non-ideal acquisition conditions.

pub mod bench;
pub mod error;
pub mod image;
pub mod nn;
pub mod resample;
pub mod zssr;

pub use crate::error::{Error, Result};
pub use crate::image::{Geometry, Image, Rotation};
pub use crate::resample::Kernel;
