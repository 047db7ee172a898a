//! Deep analysis dictionary model for single-image super-resolution.
//!
//! A [`model::DeepAmModel`] maps a mean-removed low-resolution patch to a
//! high-resolution patch through a cascade of learned analysis dictionaries,
//! each followed by soft-thresholding, and a final linear synthesis
//! dictionary. Every layer splits into information-preserving atoms (small
//! thresholds, span the signal subspace) and clustering atoms (large
//! thresholds, learned against the HR residual).

pub mod cad;
pub mod config;
pub mod error;
pub mod image;
pub mod io;
pub mod ipad;
pub mod linalg;
pub mod manifold;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod patches;
pub mod render;
pub mod resize;
pub mod scenes;
pub mod sr;
pub mod thresholds;
pub mod train;

pub use error::{Error, Result};
pub use image::GrayImage;
pub use model::{AnalysisLayer, DeepAmModel, ReluNetwork};
pub use patches::PatchGeometry;
