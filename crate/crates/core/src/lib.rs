//! Generative adversarial networks built from SELU + BatchNorm blocks,
//! with training, dataset preparation and sample-quality metrics.

pub mod dataset;
pub mod error;
pub mod image;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod train;

pub use error::{Error, Result};
