//! Deterministic SIFT-style features: difference-of-Gaussians keypoints,
//! 128-dimensional gradient histograms and one-to-one ratio-test matching.
//!
//! This is not a bit-compatible SIFT. It exists to count correspondences
//! consistently between two versions of the same image pair.

mod descriptor;
mod detect;
mod matching;
mod pyramid;

use serde::{Deserialize, Serialize};

pub use descriptor::compute_descriptors;
pub use detect::detect_keypoints;
pub use matching::{match_descriptors, match_pairs, Match, MatchReport};

use crate::error::{Error, Result};
use crate::image::{to_grayscale, ImageF};

pub const DESCRIPTOR_LEN: usize = 128;
pub const MIN_IMAGE_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f32,
    pub y: f32,
    /// Blur of the detection level in input pixels.
    pub scale: f32,
    /// Dominant gradient direction in radians, `[0, 2pi)`.
    pub orientation: f32,
    /// Absolute interpolated DoG value.
    pub response: f32,
    /// Pyramid position the keypoint was found at.
    pub octave: usize,
    pub layer: usize,
    pub intervals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub vector: [f32; DESCRIPTOR_LEN],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiftParams {
    pub octaves: usize,
    pub scales_per_octave: usize,
    pub contrast_threshold: f32,
    pub edge_threshold: f32,
    pub ratio: f32,
}

impl Default for SiftParams {
    fn default() -> Self {
        Self {
            octaves: 3,
            scales_per_octave: 3,
            contrast_threshold: 0.03,
            edge_threshold: 10.0,
            ratio: 0.8,
        }
    }
}

impl SiftParams {
    pub fn validate(&self) -> Result<()> {
        if self.octaves == 0 || self.scales_per_octave == 0 {
            return Err(Error::InvalidParameter(
                "octaves and scales per octave must be >= 1".into(),
            ));
        }
        if !(self.contrast_threshold >= 0.0 && self.edge_threshold > 0.0) {
            return Err(Error::InvalidParameter(
                "contrast threshold must be >= 0 and edge threshold > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Keypoints plus their descriptors from a single pyramid build.
pub fn extract(img: &ImageF, params: &SiftParams) -> Result<(Vec<Keypoint>, Vec<Descriptor>)> {
    let gray = to_grayscale(img);
    detect::check_input(&gray)?;
    params.validate()?;
    let pyr = pyramid::Pyramid::build(&gray, params.octaves, params.scales_per_octave);
    let keypoints = detect::detect_in(&pyr, params);
    let descriptors = descriptor::describe_in(&pyr, &keypoints)?;
    Ok((keypoints, descriptors))
}

/// Extracts features from both images and counts one-to-one matches.
pub fn count_matches(a: &ImageF, b: &ImageF, params: &SiftParams) -> Result<MatchReport> {
    let (_, da) = extract(a, params)?;
    let (_, db) = extract(b, params)?;
    match_descriptors(&da, &db, params.ratio)
}
