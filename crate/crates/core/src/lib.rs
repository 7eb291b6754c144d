//! Domain-invariant contrast maps for neural-rendering inputs, with the
//! tooling needed to evaluate them.
//!
//! - [`neugen`]: windowed standard-deviation maps normalized by their maximum,
//!   and weighted fusion back onto the source image.
//! - [`metrics`]: SSIM, PSNR and first-versus-rest class averages.
//! - [`features`]: a deterministic difference-of-Gaussians keypoint detector,
//!   gradient-histogram descriptors and ratio-test matching.
//! - [`volren`]: the alpha-compositing volume rendering kernel and a small
//!   voxel-grid renderer.
//! - [`pipeline`]: dataset scanning, batch transforms, evaluation, weight
//!   sweeps and report output.

pub mod error;
pub mod features;
pub mod image;
pub mod metrics;
pub mod neugen;
pub mod pipeline;
pub mod synth;
pub mod volren;

pub use crate::error::{Error, Result};
pub use crate::image::ImageF;
pub use crate::neugen::{NeuGenConfig, NeuGenMap, StatsMap};
