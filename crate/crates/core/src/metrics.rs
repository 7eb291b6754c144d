//! Full-reference image quality metrics: Gaussian-window SSIM and PSNR, plus
//! the first-versus-rest class average used to compare image collections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{to_grayscale, ImageF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub gaussian_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            gaussian_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn with_window(self, window: usize) -> Self {
        Self { window, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "SSIM window must be odd and >= 3, got {}",
                self.window
            )));
        }
        let positive = [self.gaussian_sigma, self.k1, self.k2, self.dynamic_range];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter(
                "SSIM sigma, k1, k2 and dynamic range must be > 0".into(),
            ));
        }
        Ok(())
    }

    fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

/// SSIM and PSNR of one image pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub ssim: f64,
    /// `f64::INFINITY` for identical images.
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
}

/// Infinite PSNR is written as the string `"inf"` since JSON has no infinity.
pub mod psnr_serde {
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            "inf".serialize(s)
        } else {
            v.serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(de::Error::custom(format!("bad PSNR value {s:?}"))),
        }
    }
}

fn check_same(a: &ImageF, b: &ImageF) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let k: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.into_iter().map(|v| v / total).collect()
}

/// Separable "valid" filtering: output is `(w - k + 1) x (h - k + 1)`.
fn filter_valid(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut tmp = vec![0f64; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = kernel.iter().zip(&row[x..x + k]).map(|(g, v)| g * v).sum();
        }
    }
    let mut out = vec![0f64; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, g)| g * tmp[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over every window position fully inside the image.
///
/// RGB inputs are compared on their luma. When the image is smaller than
/// the configured window, the window shrinks to the largest odd size that
/// fits (the Gaussian is renormalized).
pub fn ssim(a: &ImageF, b: &ImageF, p: &SsimParams) -> Result<f64> {
    check_same(a, b)?;
    p.validate()?;
    let (w, h) = (a.width(), a.height());
    let fit = w.min(h);
    let size = if p.window <= fit {
        p.window
    } else if fit % 2 == 1 {
        fit
    } else {
        fit - 1
    };
    let kernel = gaussian_kernel(size, p.gaussian_sigma);

    let x: Vec<f64> = to_grayscale(a).data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = to_grayscale(b).data().iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u * v).collect();

    let mu_x = filter_valid(&x, w, h, &kernel);
    let mu_y = filter_valid(&y, w, h, &kernel);
    let e_xx = filter_valid(&xx, w, h, &kernel);
    let e_yy = filter_valid(&yy, w, h, &kernel);
    let e_xy = filter_valid(&xy, w, h, &kernel);

    let (c1, c2) = (p.c1(), p.c2());
    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2))
        })
        .sum();
    Ok(total / n as f64)
}

pub fn mse(a: &ImageF, b: &ImageF) -> Result<f64> {
    check_same(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&u, &v)| {
            let d = u as f64 - v as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// `10 log10(1 / mse)`, or `+inf` when `mse == 0`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// PSNR in dB with a peak value of 1.
pub fn psnr(a: &ImageF, b: &ImageF) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn score_pair(a: &ImageF, b: &ImageF, p: &SsimParams) -> Result<PairScore> {
    Ok(PairScore {
        ssim: ssim(a, b, p)?,
        psnr_db: psnr(a, b)?,
    })
}

/// Mean SSIM of the first image against each of the others.
pub fn class_ssim(images: &[ImageF], p: &SsimParams) -> Result<f64> {
    if images.len() < 2 {
        return Err(Error::TooFewImages {
            needed: 2,
            got: images.len(),
        });
    }
    let first = &images[0];
    let mut total = 0.0;
    for other in &images[1..] {
        total += ssim(first, other, p)?;
    }
    Ok(total / (images.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: usize, h: usize, c: usize, seed: u64) -> ImageF {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageF::from_fn(w, h, c, |_, _, _| rng.random::<f32>()).unwrap()
    }

    #[test]
    fn identical_images_score_one() {
        let img = noise(24, 20, 3, 1);
        let s = ssim(&img, &img, &SsimParams::default()).unwrap();
        assert!((s - 1.0).abs() < 1e-9);
        assert_eq!(psnr(&img, &img).unwrap(), f64::INFINITY);
    }

    #[test]
    fn constant_images_closed_form() {
        let p = SsimParams::default();
        let a = ImageF::filled(16, 16, 1, 0.5).unwrap();
        assert!((ssim(&a, &a.clone(), &p).unwrap() - 1.0).abs() < 1e-12);

        let a = ImageF::filled(16, 16, 1, 0.25).unwrap();
        let b = ImageF::filled(16, 16, 1, 0.75).unwrap();
        let expected = (2.0 * 0.1875 + 1e-4) / (0.0625 + 0.5625 + 1e-4);
        let got = ssim(&a, &b, &p).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got}");
        assert!((got - 0.60006).abs() < 1e-4);
    }

    #[test]
    fn psnr_values() {
        assert_eq!(psnr_from_mse(0.01), 20.0);
        assert_eq!(psnr_from_mse(1e-4), 40.0);
        let a = ImageF::filled(8, 8, 3, 0.5).unwrap();
        let b = ImageF::filled(8, 8, 3, 0.6).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-5);
        let b = ImageF::filled(8, 8, 3, 0.51).unwrap();
        assert!((psnr(&a, &b).unwrap() - 40.0).abs() < 1e-4);
    }

    #[test]
    fn mismatched_dimensions() {
        let a = ImageF::filled(8, 8, 1, 0.5).unwrap();
        let b = ImageF::filled(8, 9, 1, 0.5).unwrap();
        assert!(matches!(ssim(&a, &b, &SsimParams::default()), Err(Error::DimensionMismatch(_))));
        assert!(matches!(psnr(&a, &b), Err(Error::DimensionMismatch(_))));
        assert!(matches!(class_ssim(&[a.clone(), b], &SsimParams::default()), Err(Error::DimensionMismatch(_))));
        assert!(matches!(class_ssim(&[a], &SsimParams::default()), Err(Error::TooFewImages { .. })));
    }

    #[test]
    fn class_average_unrolls() {
        let p = SsimParams::default();
        let i = noise(16, 16, 1, 2);
        let j = noise(16, 16, 1, 3);
        assert!((class_ssim(&[i.clone(), i.clone()], &p).unwrap() - 1.0).abs() < 1e-12);
        let expected = (1.0 + ssim(&i, &j, &p).unwrap()) / 2.0;
        let got = class_ssim(&[i.clone(), i.clone(), j], &p).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn small_images_shrink_window() {
        let a = noise(5, 7, 1, 4);
        let b = noise(5, 7, 1, 5);
        let s = ssim(&a, &b, &SsimParams::default()).unwrap();
        assert!((-1.0..=1.0).contains(&s));
        assert!(SsimParams::default().with_window(4).validate().is_err());
    }

    #[test]
    fn pair_score_json_keeps_infinity() {
        let s = PairScore { ssim: 1.0, psnr_db: f64::INFINITY };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"ssim":1.0,"psnr_db":"inf"}"#);
        assert_eq!(serde_json::from_str::<PairScore>(&text).unwrap(), s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn symmetric_and_bounded(sa in any::<u64>(), sb in any::<u64>(), c in prop_oneof![Just(1usize), Just(3usize)]) {
            let a = noise(14, 13, c, sa);
            let b = noise(14, 13, c, sb);
            let p = SsimParams::default();
            let ab = ssim(&a, &b, &p).unwrap();
            let ba = ssim(&b, &a, &p).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&ab));
            prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        }
    }
}
