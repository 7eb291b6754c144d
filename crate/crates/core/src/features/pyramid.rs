use crate::image::ImageF;

/// Blur already present in an input image.
pub(crate) const INPUT_BLUR: f32 = 0.5;
/// Blur of the first level of every octave, in octave pixels.
pub(crate) const BASE_SIGMA: f32 = 1.6;

/// Single-channel `f32` raster used inside the pyramid.
#[derive(Debug, Clone)]
pub(crate) struct Plane {
    pub w: usize,
    pub h: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn from_image(img: &ImageF) -> Self {
        Self {
            w: img.width(),
            h: img.height(),
            data: img.plane(0).to_vec(),
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }

    /// Bilinear 2x enlargement; even output samples copy the source.
    fn upsample(&self) -> Plane {
        let (w, h) = (2 * self.w, 2 * self.h);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            let (y0, fy) = (y / 2, (y % 2) as f32 * 0.5);
            let y1 = (y0 + 1).min(self.h - 1);
            for x in 0..w {
                let (x0, fx) = (x / 2, (x % 2) as f32 * 0.5);
                let x1 = (x0 + 1).min(self.w - 1);
                let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
                let bottom = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
                data.push(top * (1.0 - fy) + bottom * fy);
            }
        }
        Plane { w, h, data }
    }

    fn downsample(&self) -> Plane {
        let (w, h) = (self.w.div_ceil(2), self.h.div_ceil(2));
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(self.at(2 * x, 2 * y));
            }
        }
        Plane { w, h, data }
    }

    fn sub(&self, other: &Plane) -> Plane {
        Plane {
            w: self.w,
            h: self.h,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Mirror index into `0..n` without repeating the edge sample.
fn mirror(mut i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

fn kernel(sigma: f32) -> Vec<f32> {
    let r = (4.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f32> = (-r..=r)
        .map(|i| (-((i * i) as f32) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

pub(crate) fn gaussian_blur(src: &Plane, sigma: f32) -> Plane {
    if sigma <= 0.0 {
        return src.clone();
    }
    let k = kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = (src.w, src.h);
    let mut tmp = vec![0f32; w * h];
    for y in 0..h {
        let row = &src.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                acc += kv * row[mirror(x as isize + i as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                acc += kv * tmp[mirror(y as isize + i as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    Plane { w, h, data: out }
}

/// Gaussian and difference-of-Gaussian levels for every octave.
pub(crate) struct Pyramid {
    pub intervals: usize,
    /// `gauss[o]` has `intervals + 3` levels.
    pub gauss: Vec<Vec<Plane>>,
    /// `dog[o]` has `intervals + 2` levels.
    pub dog: Vec<Vec<Plane>>,
}

/// Number of octaves that keep the smallest level at least 8 pixels wide.
pub(crate) fn usable_octaves(w: usize, h: usize, requested: usize) -> usize {
    let mut n = 0;
    let mut side = w.min(h);
    while n < requested && side >= 8 {
        n += 1;
        side = side.div_ceil(2);
    }
    n.max(1)
}

/// Size of one octave-`o` pixel in input pixels. The first octave works on
/// the input enlarged twice.
pub(crate) fn octave_factor(o: usize) -> f32 {
    (1usize << o) as f32 * 0.5
}

/// In-octave blur of level `i`.
pub(crate) fn level_sigma(i: f32, intervals: usize) -> f32 {
    BASE_SIGMA * 2f32.powf(i / intervals as f32)
}

impl Pyramid {
    pub fn build(gray: &ImageF, octaves: usize, intervals: usize) -> Self {
        let src = Plane::from_image(gray).upsample();
        let octaves = usable_octaves(src.w, src.h, octaves);
        let assumed = 2.0 * INPUT_BLUR;
        let first = (BASE_SIGMA * BASE_SIGMA - assumed * assumed).sqrt();
        let mut base = gaussian_blur(&src, first);

        let levels = intervals + 3;
        let mut gauss = Vec::with_capacity(octaves);
        let mut dog = Vec::with_capacity(octaves);
        for o in 0..octaves {
            if o > 0 {
                let prev: &Vec<Plane> = &gauss[o - 1];
                base = prev[intervals].downsample();
            }
            let mut g = Vec::with_capacity(levels);
            g.push(base.clone());
            for i in 1..levels {
                let prev = level_sigma((i - 1) as f32, intervals);
                let next = level_sigma(i as f32, intervals);
                let step = (next * next - prev * prev).sqrt();
                let blurred = gaussian_blur(&g[i - 1], step);
                g.push(blurred);
            }
            let d = g.windows(2).map(|p| p[1].sub(&p[0])).collect();
            gauss.push(g);
            dog.push(d);
        }
        Self {
            intervals,
            gauss,
            dog,
        }
    }
}
