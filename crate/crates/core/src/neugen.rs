//! Patch-statistics contrast normalization.
//!
//! Every pixel gets the population standard deviation of the `s x s` window
//! centred on it, taken jointly over all channels. Dividing that map by its
//! global maximum gives a single-channel contrast map in `[0, 1]` that is
//! unchanged by any positive affine intensity transform of the input. The
//! map can then be added back onto the source image with a weight.
//!
//! Two routes compute the windowed statistics: [`patch_stats`] visits every
//! window sample directly and serves as the reference, and
//! [`windowed_stats_fast`] answers each window from summed-area tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageF;

/// Standard deviations at or below this maximum are treated as a blank image.
pub const DEGENERATE_EPSILON: f32 = 1e-12;

pub const DEFAULT_PATCH_SIZE: usize = 3;
pub const DEFAULT_FUSION_WEIGHT: f32 = 0.5;

/// How windows are extended past the image edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BorderPolicy {
    /// Mirror about the edge pixel without repeating it (`-1 -> 1`).
    #[default]
    Reflect,
}

/// How channels enter the window statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    /// One mean and deviation over all `s * s * C` samples.
    #[default]
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuGenConfig {
    pub patch_size: usize,
    pub fusion_weight: f32,
    pub border: BorderPolicy,
    pub channel_mode: ChannelMode,
}

impl Default for NeuGenConfig {
    fn default() -> Self {
        Self {
            patch_size: DEFAULT_PATCH_SIZE,
            fusion_weight: DEFAULT_FUSION_WEIGHT,
            border: BorderPolicy::Reflect,
            channel_mode: ChannelMode::Joint,
        }
    }
}

impl NeuGenConfig {
    pub fn new(patch_size: usize, fusion_weight: f32) -> Result<Self> {
        let cfg = Self {
            patch_size,
            fusion_weight,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_weight(self, fusion_weight: f32) -> Self {
        Self {
            fusion_weight,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_patch_size(self.patch_size)?;
        check_weight(self.fusion_weight)
    }
}

fn check_patch_size(s: usize) -> Result<()> {
    if s < 3 || s % 2 == 0 {
        return Err(Error::InvalidPatchSize(s));
    }
    Ok(())
}

fn check_weight(w: f32) -> Result<()> {
    if !w.is_finite() || w < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "fusion weight must be finite and >= 0, got {w}"
        )));
    }
    Ok(())
}

fn check_window(img: &ImageF, s: usize) -> Result<()> {
    check_patch_size(s)?;
    // a single reflection must cover the half window
    if s > 2 * img.width() - 1 || s > 2 * img.height() - 1 {
        return Err(Error::PatchTooLarge {
            size: s,
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(())
}

/// Per-pixel window mean and standard deviation plus the global maximum deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsMap {
    pub mean: ImageF,
    pub std: ImageF,
    pub z: f32,
}

impl StatsMap {
    fn from_planes(width: usize, height: usize, mean: Vec<f32>, std: Vec<f32>) -> Result<Self> {
        let z = std.iter().copied().fold(0.0f32, f32::max);
        Ok(Self {
            mean: ImageF::new(width, height, 1, mean)?,
            std: ImageF::new(width, height, 1, std)?,
            z,
        })
    }
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * n - 2 - i
    } else {
        i
    };
    r as usize
}

fn reflect_table(n: usize, radius: usize) -> Vec<usize> {
    (0..n + 2 * radius)
        .map(|i| reflect(i as isize - radius as isize, n))
        .collect()
}

/// Windowed statistics by direct enumeration of every window sample.
///
/// `O(s^2 * C)` per pixel. Mean and deviation use a two-pass population
/// formula in `f64`.
pub fn patch_stats(img: &ImageF, s: usize, border: BorderPolicy) -> Result<StatsMap> {
    check_window(img, s)?;
    let BorderPolicy::Reflect = border;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let r = s / 2;
    let xs = reflect_table(w, r);
    let ys = reflect_table(h, r);
    let count = (s * s * ch) as f64;

    let mut mean = Vec::with_capacity(w * h);
    let mut std = Vec::with_capacity(w * h);
    let mut window = Vec::with_capacity(s * s * ch);
    for y in 0..h {
        for x in 0..w {
            window.clear();
            for c in 0..ch {
                let plane = img.plane(c);
                for &sy in &ys[y..y + s] {
                    let row = &plane[sy * w..(sy + 1) * w];
                    window.extend(xs[x..x + s].iter().map(|&sx| row[sx] as f64));
                }
            }
            let mu = window.iter().sum::<f64>() / count;
            let var = window.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / count;
            mean.push(mu as f32);
            std.push(var.sqrt() as f32);
        }
    }
    StatsMap::from_planes(w, h, mean, std)
}

/// Windowed statistics from summed-area tables of `x` and `x^2`.
///
/// Same contract as [`patch_stats`] with `O(1)` work per pixel. Samples are
/// shifted by one reference value before accumulation so that the table
/// entries stay small; variance is `max(E[x^2] - E[x]^2, 0)`.
pub fn windowed_stats_fast(img: &ImageF, s: usize, border: BorderPolicy) -> Result<StatsMap> {
    check_window(img, s)?;
    let BorderPolicy::Reflect = border;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let r = s / 2;
    let xs = reflect_table(w, r);
    let ys = reflect_table(h, r);
    let (pw, ph) = (w + 2 * r, h + 2 * r);
    let stride = pw + 1;

    // a constant image then shifts to exact zeros
    let shift = img.get(w / 2, h / 2, 0) as f64;

    let mut sum = vec![0f64; stride * (ph + 1)];
    let mut sum_sq = vec![0f64; stride * (ph + 1)];
    for py in 0..ph {
        let sy = ys[py];
        let (mut row_sum, mut row_sq) = (0f64, 0f64);
        for px in 0..pw {
            let at = sy * w + xs[px];
            for c in 0..ch {
                let d = img.plane(c)[at] as f64 - shift;
                row_sum += d;
                row_sq += d * d;
            }
            let i = (py + 1) * stride + px + 1;
            sum[i] = sum[i - stride] + row_sum;
            sum_sq[i] = sum_sq[i - stride] + row_sq;
        }
    }

    let count = (s * s * ch) as f64;
    let window = |t: &[f64], x: usize, y: usize| {
        let (x1, y1) = (x + s, y + s);
        t[y1 * stride + x1] - t[y * stride + x1] - t[y1 * stride + x] + t[y * stride + x]
    };
    let mut mean = Vec::with_capacity(w * h);
    let mut std = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let m = window(&sum, x, y) / count;
            let var = (window(&sum_sq, x, y) / count - m * m).max(0.0);
            mean.push((m + shift) as f32);
            std.push(var.sqrt() as f32);
        }
    }
    StatsMap::from_planes(w, h, mean, std)
}

/// The normalized contrast map together with its normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuGenMap {
    /// Single-channel map in `[0, 1]`.
    pub map: ImageF,
    /// Maximum window deviation used as the divisor.
    pub z: f32,
    /// Set when `z <= DEGENERATE_EPSILON`; the map is then all zeros.
    pub degenerate: bool,
}

impl NeuGenMap {
    pub fn from_stats(stats: &StatsMap) -> Self {
        let z = stats.z;
        if z <= DEGENERATE_EPSILON {
            return Self {
                map: stats.std.map(|_| 0.0),
                z,
                degenerate: true,
            };
        }
        Self {
            map: stats.std.map(|v| v / z),
            z,
            degenerate: false,
        }
    }
}

/// Computes the contrast map `std / max(std)` using the summed-area-table path.
pub fn neugen_map(img: &ImageF, cfg: &NeuGenConfig) -> Result<NeuGenMap> {
    cfg.validate()?;
    let stats = windowed_stats_fast(img, cfg.patch_size, cfg.border)?;
    Ok(NeuGenMap::from_stats(&stats))
}

/// Same as [`neugen_map`] but through the direct-enumeration statistics.
pub fn neugen_map_naive(img: &ImageF, cfg: &NeuGenConfig) -> Result<NeuGenMap> {
    cfg.validate()?;
    let stats = patch_stats(img, cfg.patch_size, cfg.border)?;
    Ok(NeuGenMap::from_stats(&stats))
}

/// `clamp(img + w * gmap, 0, 1)` with `gmap` added to every channel.
pub fn fuse(img: &ImageF, gmap: &ImageF, w: f32) -> Result<ImageF> {
    if gmap.channels() != 1 {
        return Err(Error::InvalidChannelCount(gmap.channels()));
    }
    if !img.same_extent(gmap) {
        return Err(Error::DimensionMismatch(format!(
            "image is {}x{}, map is {}x{}",
            img.width(),
            img.height(),
            gmap.width(),
            gmap.height()
        )));
    }
    check_weight(w)?;
    let g = gmap.data();
    let n = img.plane_len();
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v + w * g[i % n]).clamp(0.0, 1.0))
        .collect();
    ImageF::new(img.width(), img.height(), img.channels(), data)
}

/// Contrast map followed by weighted fusion with the source.
pub fn neugen_enhance(img: &ImageF, cfg: &NeuGenConfig) -> Result<ImageF> {
    let g = neugen_map(img, cfg)?;
    fuse(img, &g.map, cfg.fusion_weight)
}
