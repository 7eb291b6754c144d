use std::f32::consts::PI;

use super::detect::check_input;
use super::pyramid::{level_sigma, octave_factor, Plane, Pyramid};
use super::{Descriptor, Keypoint, DESCRIPTOR_LEN};
use crate::error::{Error, Result};
use crate::image::ImageF;

const GRID: usize = 4;
const ORI_BINS: usize = 8;
const SPATIAL_FACTOR: f32 = 3.0;
const CLIP: f32 = 0.2;

/// Gradient-orientation histogram descriptors (4x4 cells, 8 bins) in the
/// frame of each keypoint's orientation.
///
/// The Gaussian pyramid is rebuilt from `gray` using the octave/level
/// bookkeeping carried by the keypoints, so they must come from
/// [`super::detect_keypoints`] on the same image.
pub fn compute_descriptors(gray: &ImageF, keypoints: &[Keypoint]) -> Result<Vec<Descriptor>> {
    if keypoints.is_empty() {
        return Ok(Vec::new());
    }
    check_input(gray)?;
    let intervals = keypoints[0].intervals;
    if keypoints.iter().any(|k| k.intervals != intervals) {
        return Err(Error::InvalidParameter(
            "keypoints come from pyramids with different scales per octave".into(),
        ));
    }
    let octaves = keypoints.iter().map(|k| k.octave).max().unwrap_or(0) + 1;
    let pyr = Pyramid::build(gray, octaves, intervals);
    describe_in(&pyr, keypoints)
}

pub(crate) fn describe_in(pyr: &Pyramid, keypoints: &[Keypoint]) -> Result<Vec<Descriptor>> {
    keypoints
        .iter()
        .map(|kp| {
            let level = pyr
                .gauss
                .get(kp.octave)
                .and_then(|o| o.get(kp.layer))
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "keypoint octave {} layer {} is outside the pyramid",
                        kp.octave, kp.layer
                    ))
                })?;
            Ok(describe(level, kp, pyr.intervals))
        })
        .collect()
}

fn describe(g: &Plane, kp: &Keypoint, intervals: usize) -> Descriptor {
    let factor = octave_factor(kp.octave);
    let cx = kp.x / factor;
    let cy = kp.y / factor;
    let scale_oct = kp.scale / factor;
    debug_assert!(scale_oct >= level_sigma(0.0, intervals) * 0.5);

    let cell = SPATIAL_FACTOR * scale_oct;
    let radius = (cell * std::f32::consts::SQRT_2 * (GRID as f32 + 1.0) * 0.5)
        .round()
        .min((g.w + g.h) as f32) as isize;
    let (sin, cos) = kp.orientation.sin_cos();
    let weight_denom = -1.0 / (0.5 * (GRID * GRID) as f32);
    let (ix, iy) = (cx.round() as isize, cy.round() as isize);

    let mut hist = [0f32; (GRID + 2) * (GRID + 2) * (ORI_BINS + 2)];
    let idx = |r: usize, c: usize, o: usize| (r * (GRID + 2) + c) * (ORI_BINS + 2) + o;
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let (xx, yy) = (ix + dx, iy + dy);
            if xx <= 0 || yy <= 0 || xx >= g.w as isize - 1 || yy >= g.h as isize - 1 {
                continue;
            }
            // offset from the true (subpixel) centre, rotated into the keypoint frame
            let ox = xx as f32 - cx;
            let oy = yy as f32 - cy;
            let c_rot = (cos * ox + sin * oy) / cell;
            let r_rot = (-sin * ox + cos * oy) / cell;
            let rbin = r_rot + GRID as f32 / 2.0 - 0.5;
            let cbin = c_rot + GRID as f32 / 2.0 - 0.5;
            if rbin <= -1.0 || rbin >= GRID as f32 || cbin <= -1.0 || cbin >= GRID as f32 {
                continue;
            }
            let (xu, yu) = (xx as usize, yy as usize);
            let gx = g.at(xu + 1, yu) - g.at(xu - 1, yu);
            let gy = g.at(xu, yu + 1) - g.at(xu, yu - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let weight = ((c_rot * c_rot + r_rot * r_rot) * weight_denom).exp();
            let theta = (gy.atan2(gx) - kp.orientation).rem_euclid(2.0 * PI);
            let obin = theta * ORI_BINS as f32 / (2.0 * PI);

            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            let v = mag * weight;
            // shift by one so the -1 row/column lands at index 0
            let (r0, c0) = ((r0 + 1.0) as usize, (c0 + 1.0) as usize);
            let o0 = o0 as usize % ORI_BINS;
            for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
                for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
                    for (dor, wo) in [(0, 1.0 - fo), (1, fo)] {
                        hist[idx(r0 + dr, c0 + dc, o0 + dor)] += v * wr * wc * wo;
                    }
                }
            }
        }
    }

    let mut vector = [0f32; DESCRIPTOR_LEN];
    for r in 0..GRID {
        for c in 0..GRID {
            for o in 0..ORI_BINS {
                let mut v = hist[idx(r + 1, c + 1, o)];
                // orientation wrap-around
                if o == 0 {
                    v += hist[idx(r + 1, c + 1, ORI_BINS)];
                }
                vector[(r * GRID + c) * ORI_BINS + o] = v;
            }
        }
    }
    normalize(&mut vector);
    for v in vector.iter_mut() {
        *v = v.min(CLIP);
    }
    normalize(&mut vector);
    Descriptor { vector }
}

fn normalize(v: &mut [f32; DESCRIPTOR_LEN]) {
    let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x = (*x as f64 / norm) as f32);
    } else {
        // flat neighbourhood: fall back to the uniform unit vector
        v.fill(1.0 / (DESCRIPTOR_LEN as f32).sqrt());
    }
}
