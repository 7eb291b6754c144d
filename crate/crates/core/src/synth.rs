//! Seeded synthetic images and fixture corpora.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::image::{save_image, ImageF};

/// Uniform noise in `[0, 1)`.
pub fn noise(width: usize, height: usize, channels: usize, seed: u64) -> ImageF {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageF::from_fn(width, height, channels, |_, _, _| rng.random::<f32>()).unwrap()
}

/// Single bright isotropic Gaussian on black, peak value 1.
pub fn gaussian_blob(width: usize, height: usize, cx: f32, cy: f32, sigma: f32) -> ImageF {
    ImageF::from_fn(width, height, 1, |x, y, _| {
        let d2 = (x as f32 - cx).powi(2) + (y as f32 - cy).powi(2);
        (-d2 / (2.0 * sigma * sigma)).exp()
    })
    .unwrap()
}

pub fn checkerboard(width: usize, height: usize, cell: usize, dark: f32, light: f32) -> ImageF {
    ImageF::from_fn(width, height, 1, |x, y, _| {
        if (x / cell + y / cell) % 2 == 0 {
            dark
        } else {
            light
        }
    })
    .unwrap()
}

/// Checkerboard whose dark and light cells each get a seeded random level
/// (dark in `[0.05, 0.45]`, light in `[0.55, 0.95]`).
pub fn jittered_checkerboard(width: usize, height: usize, cell: usize, seed: u64) -> ImageF {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cols, rows) = (width.div_ceil(cell), height.div_ceil(cell));
    let levels: Vec<f32> = (0..cols * rows)
        .map(|i| {
            let light = (i % cols + i / cols) % 2 == 1;
            let base = if light { 0.55 } else { 0.05 };
            base + rng.random_range(0.0f32..0.4)
        })
        .collect();
    ImageF::from_fn(width, height, 1, |x, y, _| levels[(y / cell) * cols + x / cell]).unwrap()
}

/// Smooth random texture: a sum of randomly placed Gaussian blobs per
/// channel, rescaled to `[0.05, 0.95]`.
pub fn texture(width: usize, height: usize, channels: usize, seed: u64) -> ImageF {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs = (width * height / 96).max(8);
    let mut planes = Vec::with_capacity(channels);
    for _ in 0..channels {
        let params: Vec<(f32, f32, f32, f32)> = (0..blobs)
            .map(|_| {
                (
                    rng.random_range(0.0..width as f32),
                    rng.random_range(0.0..height as f32),
                    rng.random_range(1.5f32..5.0),
                    rng.random_range(-1.0f32..1.0),
                )
            })
            .collect();
        let mut plane = vec![0f32; width * height];
        for (y, row) in plane.chunks_mut(width).enumerate() {
            for (x, v) in row.iter_mut().enumerate() {
                *v = params
                    .iter()
                    .map(|&(bx, by, s, amp)| {
                        let d2 = (x as f32 - bx).powi(2) + (y as f32 - by).powi(2);
                        amp * (-d2 / (2.0 * s * s)).exp()
                    })
                    .sum();
            }
        }
        let lo = plane.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = plane.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let span = (hi - lo).max(f32::EPSILON);
        plane.iter_mut().for_each(|v| *v = 0.05 + 0.9 * (*v - lo) / span);
        planes.push(plane);
    }
    let refs: Vec<&[f32]> = planes.iter().map(|p| p.as_slice()).collect();
    ImageF::from_planes(width, height, &refs).unwrap()
}

/// Mid-gray field with sparse, well separated light and dark Gaussian
/// spots, clamped to `[0, 1]`. Every channel shares the spot layout with its
/// own amplitudes.
pub fn spot_field(width: usize, height: usize, channels: usize, seed: u64) -> ImageF {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spots: Vec<(f32, f32, f32)> = (0..(width * height / 200).max(4))
        .map(|_| {
            (
                rng.random_range(0.0..width as f32),
                rng.random_range(0.0..height as f32),
                rng.random_range(1.2f32..2.5),
            )
        })
        .collect();
    let amps: Vec<f32> = (0..spots.len() * channels)
        .map(|_| {
            let a = rng.random_range(0.4f32..0.5);
            if rng.random::<bool>() {
                a
            } else {
                -a
            }
        })
        .collect();
    ImageF::from_fn(width, height, channels, |x, y, c| {
        let v: f32 = spots
            .iter()
            .enumerate()
            .map(|(i, &(bx, by, s))| {
                let d2 = (x as f32 - bx).powi(2) + (y as f32 - by).powi(2);
                amps[i * channels + c] * (-d2 / (2.0 * s * s)).exp()
            })
            .sum();
        (0.5 + v).clamp(0.0, 1.0)
    })
    .unwrap()
}

/// Gain and offset applied to the base image of every fixture scene; the
/// first entry is the identity.
pub const AFFINE_VARIANTS: [(f32, f32); 5] = [
    (1.0, 0.0),
    (0.75, 0.125),
    (0.5, 0.3125),
    (1.25, -0.0625),
    (0.375, 0.5),
];

const Q16: u32 = 65535;

/// Writes `scenes` directories of 16-bit PNGs: a base [`spot_field`]
/// followed by its [`AFFINE_VARIANTS`].
///
/// Base samples are quantized to multiples of 8 in the 16-bit domain and
/// every gain is a multiple of 1/8, so each variant is an exact affine image
/// of its base even after PNG quantization.
pub fn write_affine_corpus(
    root: &Path,
    scenes: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<Vec<ImageF>>> {
    let mut corpus = Vec::with_capacity(scenes);
    for s in 0..scenes {
        let dir = root.join(format!("scene_{s:02}"));
        std::fs::create_dir_all(&dir)?;
        let base = spot_field(size, size, 3, seed.wrapping_add(s as u64));
        // confine the base to [0.05, 0.8] so every variant stays inside [0, 1]
        let codes: Vec<u32> = base
            .data()
            .iter()
            .map(|&v| {
                let t = 0.05 + 0.75 * v;
                ((t * Q16 as f32 / 8.0).round() as u32) * 8
            })
            .collect();
        let mut images = Vec::with_capacity(AFFINE_VARIANTS.len());
        for (k, &(gain, offset)) in AFFINE_VARIANTS.iter().enumerate() {
            let gain8 = (gain * 8.0) as u32;
            let offset_code = (offset * Q16 as f32).round() as i64;
            let data = codes
                .iter()
                .map(|&q| {
                    let v = (gain8 * q / 8) as i64 + offset_code;
                    debug_assert!((0..=Q16 as i64).contains(&v));
                    v as f32 / Q16 as f32
                })
                .collect();
            let img = ImageF::new(size, size, 3, data)?;
            save_image(&img, dir.join(format!("{k:02}.png")), 16)?;
            images.push(img);
        }
        corpus.push(images);
    }
    Ok(corpus)
}
