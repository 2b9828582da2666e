//! Lossy coding of multispectral image cubes.
//!
//! Bands are coded with a block-transform codec whose intra predictors are
//! extended by cross-spectral predictors, most notably a pel-recursive
//! affine predictor that re-estimates its model for every sample from the
//! causal neighbourhood.

pub mod bitstream;
pub mod codec;
pub mod cube;
pub mod error;
pub mod metrics;
pub mod predict;
pub mod regress;
pub mod transform;

pub use error::{Error, Result};
