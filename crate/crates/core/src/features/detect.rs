use std::cmp::Ordering;
use std::f32::consts::PI;

use super::pyramid::{level_sigma, octave_factor, Plane, Pyramid};
use super::{Keypoint, SiftParams, MIN_IMAGE_SIZE};
use crate::error::{Error, Result};
use crate::image::ImageF;

const IMAGE_BORDER: usize = 5;
const MAX_REFINE_STEPS: usize = 5;
const ORI_BINS: usize = 36;
const ORI_SIGMA_FACTOR: f32 = 1.5;
const ORI_RADIUS_FACTOR: f32 = 3.0 * ORI_SIGMA_FACTOR;
const ORI_PEAK_RATIO: f32 = 0.8;

pub(crate) fn check_input(gray: &ImageF) -> Result<()> {
    if gray.channels() != 1 {
        return Err(Error::InvalidChannelCount(gray.channels()));
    }
    if gray.width() < MIN_IMAGE_SIZE || gray.height() < MIN_IMAGE_SIZE {
        return Err(Error::ImageTooSmall {
            width: gray.width(),
            height: gray.height(),
            min: MIN_IMAGE_SIZE,
        });
    }
    Ok(())
}

/// Difference-of-Gaussians keypoints with subpixel refinement, contrast and
/// edge rejection, and one keypoint per dominant gradient orientation.
///
/// Output is sorted by response (descending), then `y`, then `x`.
pub fn detect_keypoints(gray: &ImageF, params: &SiftParams) -> Result<Vec<Keypoint>> {
    check_input(gray)?;
    params.validate()?;
    let pyr = Pyramid::build(gray, params.octaves, params.scales_per_octave);
    Ok(detect_in(&pyr, params))
}

pub(crate) fn detect_in(pyr: &Pyramid, params: &SiftParams) -> Vec<Keypoint> {
    let intervals = pyr.intervals;
    let prelim = 0.5 * params.contrast_threshold;
    let mut out = Vec::new();
    for (o, dogs) in pyr.dog.iter().enumerate() {
        let (w, h) = (dogs[0].w, dogs[0].h);
        if w <= 2 * IMAGE_BORDER || h <= 2 * IMAGE_BORDER {
            continue;
        }
        for layer in 1..=intervals {
            for y in IMAGE_BORDER..h - IMAGE_BORDER {
                for x in IMAGE_BORDER..w - IMAGE_BORDER {
                    let v = dogs[layer].at(x, y);
                    if v.abs() <= prelim || !is_extremum(dogs, layer, x, y) {
                        continue;
                    }
                    if let Some(c) = refine(dogs, layer, x, y, intervals, params) {
                        let scale_oct = level_sigma(c.layer as f32 + c.offset[2], intervals);
                        let factor = octave_factor(o);
                        let base = Keypoint {
                            x: (c.x as f32 + c.offset[0]) * factor,
                            y: (c.y as f32 + c.offset[1]) * factor,
                            scale: scale_oct * factor,
                            orientation: 0.0,
                            response: c.response,
                            octave: o,
                            layer: c.layer,
                            intervals,
                        };
                        let g = &pyr.gauss[o][c.layer];
                        for angle in dominant_orientations(g, c.x, c.y, scale_oct) {
                            out.push(Keypoint {
                                orientation: angle,
                                ..base
                            });
                        }
                    }
                }
            }
        }
    }
    out.sort_by(keypoint_order);
    out
}

pub(crate) fn keypoint_order(a: &Keypoint, b: &Keypoint) -> Ordering {
    b.response
        .total_cmp(&a.response)
        .then(a.y.total_cmp(&b.y))
        .then(a.x.total_cmp(&b.x))
        .then(a.scale.total_cmp(&b.scale))
        .then(a.orientation.total_cmp(&b.orientation))
}

/// Strict 26-neighbour extremum, except that a neighbour later in scan order
/// (layer, row, column) may tie. A plateau then yields exactly one candidate.
fn is_extremum(dogs: &[Plane], layer: usize, x: usize, y: usize) -> bool {
    let v = dogs[layer].at(x, y);
    let here = (layer, y, x);
    let (mut above, mut below) = (true, true);
    for l in layer - 1..=layer + 1 {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                let there = (l, yy, xx);
                if there == here {
                    continue;
                }
                let n = dogs[l].at(xx, yy);
                if there < here {
                    above &= v > n;
                    below &= v < n;
                } else {
                    above &= v >= n;
                    below &= v <= n;
                }
                if !above && !below {
                    return false;
                }
            }
        }
    }
    above || below
}

struct Candidate {
    x: usize,
    y: usize,
    layer: usize,
    offset: [f32; 3],
    response: f32,
}

/// Fits a quadratic around a discrete extremum, moving to the neighbouring
/// sample while the offset exceeds half a pixel.
fn refine(
    dogs: &[Plane],
    layer: usize,
    x: usize,
    y: usize,
    intervals: usize,
    params: &SiftParams,
) -> Option<Candidate> {
    let (w, h) = (dogs[0].w, dogs[0].h);
    let (mut x, mut y, mut layer) = (x, y, layer);
    let mut visited = Vec::with_capacity(MAX_REFINE_STEPS);
    for _ in 0..MAX_REFINE_STEPS {
        visited.push((x, y, layer));
        let d = |l: usize, xx: usize, yy: usize| dogs[l].at(xx, yy) as f64;
        let v = d(layer, x, y);
        let grad = [
            0.5 * (d(layer, x + 1, y) - d(layer, x - 1, y)),
            0.5 * (d(layer, x, y + 1) - d(layer, x, y - 1)),
            0.5 * (d(layer + 1, x, y) - d(layer - 1, x, y)),
        ];
        let dxx = d(layer, x + 1, y) + d(layer, x - 1, y) - 2.0 * v;
        let dyy = d(layer, x, y + 1) + d(layer, x, y - 1) - 2.0 * v;
        let dss = d(layer + 1, x, y) + d(layer - 1, x, y) - 2.0 * v;
        let dxy = 0.25
            * (d(layer, x + 1, y + 1) - d(layer, x - 1, y + 1) - d(layer, x + 1, y - 1)
                + d(layer, x - 1, y - 1));
        let dxs = 0.25
            * (d(layer + 1, x + 1, y) - d(layer + 1, x - 1, y) - d(layer - 1, x + 1, y)
                + d(layer - 1, x - 1, y));
        let dys = 0.25
            * (d(layer + 1, x, y + 1) - d(layer + 1, x, y - 1) - d(layer - 1, x, y + 1)
                + d(layer - 1, x, y - 1));
        let hess = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
        let step = solve3(&hess, &grad)?;
        let mut offset = [-step[0], -step[1], -step[2]];

        let nx = x as f64 + offset[0].round();
        let ny = y as f64 + offset[1].round();
        let nl = layer as f64 + offset[2].round();
        // flat-topped extrema make the fit overshoot and bounce between two
        // samples; settle between them instead
        let revisit = visited.contains(&(nx as usize, ny as usize, nl as usize));
        if revisit {
            offset.iter_mut().for_each(|o| *o = o.clamp(-0.5, 0.5));
        }

        if offset.iter().all(|o| o.abs() <= 0.5) {
            let contrast = v + 0.5 * (grad[0] * offset[0] + grad[1] * offset[1] + grad[2] * offset[2]);
            if contrast.abs() < params.contrast_threshold as f64 {
                return None;
            }
            let tr = dxx + dyy;
            let det = dxx * dyy - dxy * dxy;
            let r = params.edge_threshold as f64;
            if det <= 0.0 || tr * tr * r >= (r + 1.0) * (r + 1.0) * det {
                return None;
            }
            return Some(Candidate {
                x,
                y,
                layer,
                offset: [offset[0] as f32, offset[1] as f32, offset[2] as f32],
                response: contrast.abs() as f32,
            });
        }
        if offset.iter().any(|o| o.abs() > 4.0) {
            return None;
        }
        if nl < 1.0
            || nl > intervals as f64
            || nx < IMAGE_BORDER as f64
            || nx >= (w - IMAGE_BORDER) as f64
            || ny < IMAGE_BORDER as f64
            || ny >= (h - IMAGE_BORDER) as f64
        {
            return None;
        }
        x = nx as usize;
        y = ny as usize;
        layer = nl as usize;
    }
    None
}

/// Solves `a * s = b` by Gaussian elimination with partial pivoting.
fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0f64; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..4 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Peaks of the smoothed 36-bin gradient orientation histogram within 80% of
/// the maximum, each refined by a parabola through its neighbours.
fn dominant_orientations(g: &Plane, x: usize, y: usize, scale_oct: f32) -> Vec<f32> {
    let sigma = ORI_SIGMA_FACTOR * scale_oct;
    let radius = (ORI_RADIUS_FACTOR * scale_oct).round() as isize;
    let denom = -1.0 / (2.0 * sigma * sigma);
    let mut hist = [0f32; ORI_BINS];
    for dy in -radius..=radius {
        let yy = y as isize + dy;
        if yy <= 0 || yy >= g.h as isize - 1 {
            continue;
        }
        for dx in -radius..=radius {
            let xx = x as isize + dx;
            if xx <= 0 || xx >= g.w as isize - 1 {
                continue;
            }
            let (xx, yy) = (xx as usize, yy as usize);
            let gx = g.at(xx + 1, yy) - g.at(xx - 1, yy);
            let gy = g.at(xx, yy + 1) - g.at(xx, yy - 1);
            let weight = (((dx * dx + dy * dy) as f32) * denom).exp();
            let angle = gy.atan2(gx).rem_euclid(2.0 * PI);
            let bin = ((angle * ORI_BINS as f32 / (2.0 * PI)).round() as usize) % ORI_BINS;
            hist[bin] += weight * (gx * gx + gy * gy).sqrt();
        }
    }
    let n = ORI_BINS;
    let smooth: Vec<f32> = (0..n)
        .map(|i| {
            (hist[(i + n - 2) % n] + hist[(i + 2) % n]) / 16.0
                + (hist[(i + n - 1) % n] + hist[(i + 1) % n]) * 4.0 / 16.0
                + hist[i] * 6.0 / 16.0
        })
        .collect();
    let max = smooth.iter().copied().fold(0.0f32, f32::max);
    if max <= 0.0 {
        return vec![0.0];
    }
    let mut angles = Vec::new();
    for i in 0..n {
        let (l, c, r) = (smooth[(i + n - 1) % n], smooth[i], smooth[(i + 1) % n]);
        if c > l && c > r && c >= ORI_PEAK_RATIO * max {
            let shift = 0.5 * (l - r) / (l - 2.0 * c + r);
            let bin = (i as f32 + shift).rem_euclid(n as f32);
            angles.push(bin * 2.0 * PI / n as f32);
        }
    }
    if angles.is_empty() {
        angles.push(0.0);
    }
    angles
}
