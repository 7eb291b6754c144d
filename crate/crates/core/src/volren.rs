//! Alpha-compositing quadrature of the volume rendering integral and a
//! voxel-grid renderer built on it.
//!
//! For samples `i` with step `delta_i`, density `sigma_i` and colour `c_i`:
//!
//! ```text
//! T_i   = exp(-sum_{j<i} sigma_j * delta_j)
//! C_hat = sum_i T_i * (1 - exp(-sigma_i * delta_i)) * c_i
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::ImageF;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySample {
    /// Distance along the ray.
    pub t: f64,
    pub delta: f64,
    pub sigma: f64,
    pub color: Vec3,
}

/// Samples along one ray, ordered by strictly increasing `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySamples {
    entries: Vec<RaySample>,
}

impl RaySamples {
    pub fn new(entries: Vec<RaySample>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyRay);
        }
        for (i, s) in entries.iter().enumerate() {
            if !(s.delta > 0.0) || !(s.sigma >= 0.0) || !s.t.is_finite() {
                return Err(Error::InvalidRay(format!(
                    "sample {i}: t={} delta={} sigma={}",
                    s.t, s.delta, s.sigma
                )));
            }
            if i > 0 && s.t <= entries[i - 1].t {
                return Err(Error::InvalidRay(format!("t not increasing at sample {i}")));
            }
        }
        Ok(Self { entries })
    }

    /// `n` equal segments of `[t_near, t_far]`, each sampled at its start.
    pub fn uniform<F>(t_near: f64, t_far: f64, n: usize, mut field: F) -> Result<Self>
    where
        F: FnMut(f64) -> (f64, Vec3),
    {
        if n == 0 {
            return Err(Error::EmptyRay);
        }
        let delta = (t_far - t_near) / n as f64;
        Self::new(
            (0..n)
                .map(|i| {
                    let t = t_near + i as f64 * delta;
                    let (sigma, color) = field(t);
                    RaySample {
                        t,
                        delta,
                        sigma,
                        color,
                    }
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[RaySample] {
        &self.entries
    }

    pub fn t_near(&self) -> f64 {
        self.entries[0].t
    }

    pub fn t_far(&self) -> f64 {
        let last = self.entries[self.entries.len() - 1];
        last.t + last.delta
    }
}

/// `T_i = exp(-sum_{j<i} sigma_j delta_j)`; `T_0 = 1`.
pub fn transmittance(samples: &RaySamples) -> Vec<f64> {
    let mut optical_depth = 0.0f64;
    samples
        .entries()
        .iter()
        .map(|s| {
            let t = (-optical_depth).exp();
            optical_depth += s.sigma * s.delta;
            t
        })
        .collect()
}

/// Per-sample compositing weights `T_i * (1 - exp(-sigma_i delta_i))`.
pub fn weights(samples: &RaySamples) -> Vec<f64> {
    transmittance(samples)
        .into_iter()
        .zip(samples.entries())
        .map(|(t, s)| t * -(-s.sigma * s.delta).exp_m1())
        .collect()
}

/// Sum of the compositing weights; at most 1.
pub fn accumulated_alpha(samples: &RaySamples) -> f64 {
    weights(samples).iter().sum()
}

pub fn composite_ray(samples: &RaySamples) -> Vec3 {
    let mut out = [0.0; 3];
    for (w, s) in weights(samples).into_iter().zip(samples.entries()) {
        for (o, c) in out.iter_mut().zip(s.color) {
            *o += w * c;
        }
    }
    out
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    /// Entry and exit distances of `o + t d` for `t >= 0`.
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<(f64, f64)> {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for a in 0..3 {
            if dir[a].abs() < 1e-15 {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[a];
            let (mut near, mut far) = ((self.min[a] - origin[a]) * inv, (self.max[a] - origin[a]) * inv);
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
        }
        (t1 > t0).then_some((t0, t1))
    }
}

/// Density and colour on a regular grid of voxel centres inside `bounds`.
#[derive(Debug, Clone)]
pub struct VoxelField {
    resolution: [usize; 3],
    bounds: Aabb,
    sigma: Vec<f64>,
    color: Vec<Vec3>,
}

impl VoxelField {
    pub fn new(resolution: [usize; 3], bounds: Aabb, sigma: Vec<f64>, color: Vec<Vec3>) -> Result<Self> {
        let n: usize = resolution.iter().product();
        if n == 0 || sigma.len() != n || color.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "grid {resolution:?} with {} densities and {} colours",
                sigma.len(),
                color.len()
            )));
        }
        if sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidParameter("densities must be >= 0".into()));
        }
        if (0..3).any(|a| !(bounds.max[a] > bounds.min[a])) {
            return Err(Error::InvalidParameter("empty bounds".into()));
        }
        Ok(Self {
            resolution,
            bounds,
            sigma,
            color,
        })
    }

    /// Grid filled by evaluating `f` at every voxel centre.
    pub fn from_fn<F>(resolution: [usize; 3], bounds: Aabb, f: F) -> Result<Self>
    where
        F: Fn(Vec3) -> (f64, Vec3),
    {
        let [nx, ny, nz] = resolution;
        let mut sigma = Vec::with_capacity(nx * ny * nz);
        let mut color = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let p = [
                        centre(bounds.min[0], bounds.max[0], nx, i),
                        centre(bounds.min[1], bounds.max[1], ny, j),
                        centre(bounds.min[2], bounds.max[2], nz, k),
                    ];
                    let (s, c) = f(p);
                    sigma.push(s);
                    color.push(c);
                }
            }
        }
        Self::new(resolution, bounds, sigma, color)
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    /// Trilinear interpolation between voxel centres, clamped at the faces.
    pub fn sample(&self, p: Vec3) -> (f64, Vec3) {
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let n = self.resolution[a];
            let cell = (self.bounds.max[a] - self.bounds.min[a]) / n as f64;
            let u = ((p[a] - self.bounds.min[a]) / cell - 0.5).clamp(0.0, (n - 1) as f64);
            let i = (u.floor() as usize).min(n.saturating_sub(2));
            base[a] = i;
            frac[a] = if n == 1 { 0.0 } else { u - i as f64 };
        }
        let [nx, ny, _] = self.resolution;
        let (mut sigma, mut color) = (0.0, [0.0; 3]);
        for corner in 0..8usize {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..3 {
                let bit = (corner >> a) & 1;
                let n = self.resolution[a];
                idx[a] = (base[a] + bit).min(n - 1);
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            let at = (idx[2] * ny + idx[1]) * nx + idx[0];
            sigma += w * self.sigma[at];
            for (c, v) in color.iter_mut().zip(self.color[at]) {
                *c += w * v;
            }
        }
        (sigma, color)
    }
}

fn centre(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    lo + (i as f64 + 0.5) * (hi - lo) / n as f64
}

/// Pinhole camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub origin: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Vertical field of view in degrees.
    pub fov_y_deg: f64,
    pub width: usize,
    pub height: usize,
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: Vec3) -> Option<Vec3> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n > 1e-12).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

impl Camera {
    /// Orthonormal basis (right, up, forward).
    fn basis(&self) -> Result<[Vec3; 3]> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("zero image size".into()));
        }
        if !(self.fov_y_deg > 0.0 && self.fov_y_deg < 180.0) {
            return Err(Error::InvalidCamera(format!("field of view {}", self.fov_y_deg)));
        }
        let forward = normalize(sub(self.look_at, self.origin))
            .ok_or_else(|| Error::InvalidCamera("origin equals look-at point".into()))?;
        let right = normalize(cross(forward, self.up))
            .ok_or_else(|| Error::InvalidCamera("up vector parallel to view direction".into()))?;
        let up = cross(right, forward);
        Ok([right, up, forward])
    }

    /// Unit direction through the centre of pixel `(x, y)`, `y` growing downwards.
    fn ray(&self, basis: &[Vec3; 3], x: usize, y: usize) -> Vec3 {
        let half = (self.fov_y_deg.to_radians() * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let u = ((x as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * half * aspect;
        let v = (1.0 - (y as f64 + 0.5) / self.height as f64 * 2.0) * half;
        let [r, up, f] = basis;
        normalize([
            f[0] + u * r[0] + v * up[0],
            f[1] + u * r[1] + v * up[1],
            f[2] + u * r[2] + v * up[2],
        ])
        .expect("forward component keeps the ray non-zero")
    }
}

/// Sample placement along each ray segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Segment midpoints.
    #[default]
    Uniform,
    /// One uniformly jittered sample per segment, seeded per pixel.
    Stratified { seed: u64 },
}

pub fn render_field(field: &VoxelField, camera: &Camera, n_samples: usize) -> Result<ImageF> {
    render_field_with(field, camera, n_samples, Sampling::Uniform)
}

/// Renders `field` with `n_samples` per ray between box entry and exit.
/// Rays that miss the box are black.
pub fn render_field_with(
    field: &VoxelField,
    camera: &Camera,
    n_samples: usize,
    sampling: Sampling,
) -> Result<ImageF> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let basis = camera.basis()?;
    let (w, h) = (camera.width, camera.height);
    let pixels: Vec<Vec3> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let dir = camera.ray(&basis, i % w, i / w);
            match field.bounds().intersect(camera.origin, dir) {
                Some((t0, t1)) => render_ray(field, camera.origin, dir, t0, t1, n_samples, sampling, i),
                None => [0.0; 3],
            }
        })
        .collect();
    let mut data = vec![0f32; w * h * 3];
    for (i, p) in pixels.iter().enumerate() {
        for c in 0..3 {
            data[c * w * h + i] = p[c] as f32;
        }
    }
    ImageF::new(w, h, 3, data)
}

#[allow(clippy::too_many_arguments)]
fn render_ray(
    field: &VoxelField,
    origin: Vec3,
    dir: Vec3,
    t0: f64,
    t1: f64,
    n: usize,
    sampling: Sampling,
    pixel: usize,
) -> Vec3 {
    let delta = (t1 - t0) / n as f64;
    let mut jitter: Box<dyn FnMut() -> f64> = match sampling {
        Sampling::Uniform => Box::new(|| 0.5),
        Sampling::Stratified { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (pixel as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            Box::new(move || rng.random::<f64>())
        }
    };
    let entries = (0..n)
        .map(|i| {
            let t = t0 + (i as f64 + jitter()) * delta;
            let p = [origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]];
            let (sigma, color) = field.sample(p);
            RaySample {
                t,
                delta,
                sigma,
                color,
            }
        })
        .collect();
    match RaySamples::new(entries) {
        Ok(samples) => composite_ray(&samples),
        // degenerate grazing hit: segment shorter than float resolution
        Err(_) => [0.0; 3],
    }
}

/// Outcome of one built-in renderer check.
#[derive(Debug, Clone)]
pub struct FixtureOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub image: Option<ImageF>,
}

fn unit_box() -> Aabb {
    Aabb {
        min: [-1.0; 3],
        max: [1.0; 3],
    }
}

/// Camera three units in front of the unit box, narrow enough that every
/// ray enters through the front face.
pub fn front_camera(size: usize) -> Camera {
    Camera {
        origin: [0.0, 0.0, 3.0],
        look_at: [0.0; 3],
        up: [0.0, 1.0, 0.0],
        fov_y_deg: 30.0,
        width: size,
        height: size,
    }
}

fn max_abs_diff(a: &ImageF, b: &ImageF) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (*x as f64 - *y as f64).abs())
        .fold(0.0, f64::max)
}

/// Renders the synthetic scenes and checks each against its closed form.
pub fn run_fixtures(size: usize, n_samples: usize) -> Result<Vec<FixtureOutcome>> {
    let cam = front_camera(size);
    let mut out = Vec::new();

    let empty = VoxelField::from_fn([4, 4, 4], unit_box(), |_| (0.0, [1.0, 1.0, 1.0]))?;
    let img = render_field(&empty, &cam, n_samples)?;
    let peak = img.max_value();
    out.push(FixtureOutcome {
        name: "empty_field",
        passed: peak == 0.0,
        detail: format!("max sample {peak}"),
        image: Some(img),
    });

    let red = VoxelField::from_fn([4, 4, 4], unit_box(), |_| (40.0, [1.0, 0.0, 0.0]))?;
    let img = render_field(&red, &cam, n_samples)?;
    let target = ImageF::from_planes(size, size, &[&vec![1.0; size * size], &vec![0.0; size * size], &vec![0.0; size * size]])?;
    let err = max_abs_diff(&img, &target);
    out.push(FixtureOutcome {
        name: "opaque_red_slab",
        passed: err < 1e-3,
        detail: format!("max |pixel - red| = {err:.3e}"),
        image: Some(img),
    });

    let grey = VoxelField::from_fn([4, 4, 4], unit_box(), |_| (0.5, [0.8, 0.8, 0.8]))?;
    let n = n_samples.max(512);
    let a = render_field(&grey, &cam, n)?;
    let b = render_field(&grey, &cam, 2 * n)?;
    let err = max_abs_diff(&a, &b);
    out.push(FixtureOutcome {
        name: "homogeneous_doubling",
        passed: err < 1e-4,
        detail: format!("n={n} vs n={}: max delta {err:.3e}", 2 * n),
        image: Some(a),
    });

    // density and colour both varying with depth, so the quadrature is not exact
    let ramp = VoxelField::from_fn([32, 32, 32], unit_box(), |p| {
        let depth = 1.0 - p[2];
        (0.5 + 0.75 * depth * depth, [0.1 + 0.4 * depth, 0.6, 0.9 - 0.3 * depth])
    })?;
    let mut deltas = Vec::new();
    let mut prev = render_field(&ramp, &cam, 8)?;
    for k in 1..=5 {
        let next = render_field(&ramp, &cam, 8 << k)?;
        deltas.push(max_abs_diff(&prev, &next));
        prev = next;
    }
    let shrinking = deltas.windows(2).all(|d| d[1] < d[0]);
    out.push(FixtureOutcome {
        name: "ramp_convergence",
        passed: shrinking,
        detail: format!(
            "doubling deltas [{}]",
            deltas.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ")
        ),
        image: Some(prev),
    });

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ray(sigmas: &[f64], deltas: &[f64], colors: &[Vec3]) -> RaySamples {
        let mut t = 0.0;
        RaySamples::new(
            sigmas
                .iter()
                .zip(deltas)
                .zip(colors)
                .map(|((&sigma, &delta), &color)| {
                    let s = RaySample { t, delta, sigma, color };
                    t += delta;
                    s
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn empty_medium_is_transparent() {
        let r = ray(&[0.0; 4], &[0.25; 4], &[[1.0; 3]; 4]);
        assert!(transmittance(&r).iter().all(|&t| t == 1.0));
        assert_eq!(composite_ray(&r), [0.0; 3]);
    }

    #[test]
    fn single_term_exponent() {
        let r = ray(&[2.0, 7.0], &[0.5, 0.1], &[[0.0; 3]; 2]);
        let t = transmittance(&r);
        assert_eq!(t[0], 1.0);
        assert!((t[1] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((t[1] - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn near_opaque_first_sample() {
        let r = ray(&[20.0, 3.0, 5.0], &[1.0, 0.5, 0.5], &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let c = composite_ray(&r);
        let alpha = 1.0 - (-20.0f64).exp();
        assert!((c[0] - alpha).abs() < 1e-6);
        assert!(c[1].abs() < 1e-6 && c[2].abs() < 1e-6);
    }

    #[test]
    fn homogeneous_medium_closed_form() {
        let (sigma, len, color) = (1.7, 2.0, [0.3, 0.6, 0.9]);
        let r = RaySamples::uniform(0.0, len, 1024, |_| (sigma, color)).unwrap();
        let c = composite_ray(&r);
        for k in 0..3 {
            let expected = color[k] * (1.0 - (-sigma * len).exp());
            assert!(((c[k] - expected) / expected).abs() < 1e-3);
        }
        assert!((r.t_far() - len).abs() < 1e-12 && r.t_near() == 0.0);
    }

    #[test]
    fn invalid_rays() {
        assert!(matches!(RaySamples::new(vec![]), Err(Error::EmptyRay)));
        let s = RaySample { t: 0.0, delta: 0.1, sigma: 1.0, color: [0.0; 3] };
        assert!(RaySamples::new(vec![s, s]).is_err());
        assert!(RaySamples::new(vec![RaySample { delta: 0.0, ..s }]).is_err());
        assert!(RaySamples::new(vec![RaySample { sigma: -1.0, ..s }]).is_err());
    }

    #[test]
    fn box_intersection() {
        let b = unit_box();
        let (t0, t1) = b.intersect([0.0, 0.0, 3.0], [0.0, 0.0, -1.0]).unwrap();
        assert!((t0 - 2.0).abs() < 1e-12 && (t1 - 4.0).abs() < 1e-12);
        assert!(b.intersect([0.0, 3.0, 3.0], [0.0, 0.0, -1.0]).is_none());
        let (t0, _) = b.intersect([0.0; 3], [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(t0, 0.0);
    }

    #[test]
    fn trilinear_reproduces_linear_fields() {
        let f = VoxelField::from_fn([5, 4, 3], unit_box(), |p| (5.0 + p[0] + 2.0 * p[1] - 0.5 * p[2], [0.0; 3])).unwrap();
        for p in [[0.1, -0.2, 0.3], [0.5, 0.5, -0.3], [-0.6, 0.0, 0.0]] {
            let (s, _) = f.sample(p);
            assert!((s - (5.0 + p[0] + 2.0 * p[1] - 0.5 * p[2])).abs() < 1e-12);
        }
    }

    #[test]
    fn camera_validation() {
        let f = VoxelField::from_fn([2, 2, 2], unit_box(), |_| (0.0, [0.0; 3])).unwrap();
        let cam = front_camera(4);
        assert!(render_field(&f, &Camera { width: 0, ..cam }, 8).is_err());
        assert!(render_field(&f, &Camera { fov_y_deg: 180.0, ..cam }, 8).is_err());
        assert!(render_field(&f, &Camera { look_at: cam.origin, ..cam }, 8).is_err());
        assert!(matches!(
            render_field(&f, &Camera { up: [0.0, 0.0, 1.0], ..cam }, 8),
            Err(Error::InvalidCamera(_))
        ));
    }

    #[test]
    fn missed_rays_are_black() {
        let f = VoxelField::from_fn([2, 2, 2], unit_box(), |_| (5.0, [1.0; 3])).unwrap();
        let cam = Camera { look_at: [10.0, 0.0, 3.0], ..front_camera(8) };
        assert_eq!(render_field(&f, &cam, 16).unwrap().max_value(), 0.0);
    }

    #[test]
    fn stratified_sampling_is_seeded_and_converges() {
        let f = VoxelField::from_fn([6, 6, 6], unit_box(), |p| (1.0 + p[0].abs(), [0.5, 0.2, 0.1])).unwrap();
        let cam = front_camera(12);
        let a = render_field_with(&f, &cam, 256, Sampling::Stratified { seed: 3 }).unwrap();
        let b = render_field_with(&f, &cam, 256, Sampling::Stratified { seed: 3 }).unwrap();
        assert_eq!(a, b);
        let reference = render_field(&f, &cam, 4096).unwrap();
        assert!(max_abs_diff(&a, &reference) < 1e-3);
    }

    #[test]
    fn fixtures_pass() {
        for f in run_fixtures(24, 512).unwrap() {
            assert!(f.passed, "{}: {}", f.name, f.detail);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn transmittance_and_energy_bounds(
            steps in proptest::collection::vec((0.0f64..5.0, 0.001f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..64)
        ) {
            let sig: Vec<f64> = steps.iter().map(|s| s.0).collect();
            let del: Vec<f64> = steps.iter().map(|s| s.1).collect();
            let col: Vec<Vec3> = steps.iter().map(|s| [s.2, s.3, s.4]).collect();
            let r = ray(&sig, &del, &col);
            let t = transmittance(&r);
            prop_assert_eq!(t[0], 1.0);
            for w in t.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            prop_assert!(t.iter().all(|&v| v > 0.0 && v <= 1.0));
            prop_assert!(accumulated_alpha(&r) <= 1.0 + 1e-12);
            let c = composite_ray(&r);
            for k in 0..3 {
                let cmax = col.iter().map(|c| c[k]).fold(0.0, f64::max);
                prop_assert!(c[k] <= cmax + 1e-12);
            }
        }
    }
}
