//! Planar floating-point images, PNG input/output and the `NGF1` raw-float
//! container.
//!
//! Samples are stored plane by plane: all of channel 0 in row-major order,
//! then channel 1, and so on. Values are nominally in `[0, 1]` but nothing
//! below the PNG boundary enforces that, so intermediate results (affine
//! shifts, unclamped sums) can be represented losslessly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Luma weights used by [`to_grayscale`].
pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

/// Magic bytes opening every `NGF1` file.
pub const NGF1_MAGIC: &[u8; 4] = b"NGF1";

/// Planar floating-point image with 1 or 3 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageF {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

fn check_dims(width: usize, height: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 || !(channels == 1 || channels == 3) {
        return Err(Error::InvalidDimensions {
            width,
            height,
            channels,
        });
    }
    Ok(())
}

impl ImageF {
    /// Wraps planar sample data. `data.len()` must equal `width * height * channels`.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height, channels)?;
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image by evaluating `f(x, y, c)` for every sample.
    pub fn from_fn<F>(width: usize, height: usize, channels: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> f32,
    {
        check_dims(width, height, channels)?;
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    /// Stacks equally sized single planes into one image.
    pub fn from_planes(width: usize, height: usize, planes: &[&[f32]]) -> Result<Self> {
        check_dims(width, height, planes.len())?;
        let mut data = Vec::with_capacity(width * height * planes.len());
        for p in planes {
            if p.len() != width * height {
                return Err(Error::DimensionMismatch(format!(
                    "plane of {} samples for a {width}x{height} image",
                    p.len()
                )));
            }
            data.extend_from_slice(p);
        }
        Self::new(width, height, planes.len(), data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[c * self.plane_len() + y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        let n = self.plane_len();
        self.data[c * n + y * self.width + x] = v;
    }

    /// Returns a copy of channel `c` as a 1-channel image.
    pub fn extract_plane(&self, c: usize) -> ImageF {
        ImageF {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.plane(c).to_vec(),
        }
    }

    /// Applies `f` to every sample.
    pub fn map<F: Fn(f32) -> f32>(&self, f: F) -> ImageF {
        ImageF {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamped(&self) -> ImageF {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn same_shape(&self, other: &ImageF) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn same_extent(&self, other: &ImageF) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn min_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }
}

/// Reads a PNG file into an [`ImageF`] scaled to `[0, 1]`.
///
/// Accepts 8- and 16-bit grayscale or RGB, with or without alpha. Alpha is
/// dropped. Palette images and sub-byte depths are rejected.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageF> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut reader = BufReader::new(file);
    let mut signature = [0u8; 8];
    if reader.read_exact(&mut signature).is_err() || signature != [137, 80, 78, 71, 13, 10, 26, 10]
    {
        return Err(Error::UnsupportedFormat(format!(
            "{} is not a PNG file",
            path.display()
        )));
    }
    // the decoder wants the stream from the start
    drop(reader);
    let file = File::open(path)?;
    decode_png(BufReader::new(file), path)
}

fn decode_png<R: std::io::BufRead + std::io::Seek>(reader: R, path: &Path) -> Result<ImageF> {
    let unsupported = |what: String| Error::UnsupportedFormat(format!("{}: {what}", path.display()));
    let mut decoder = png::Decoder::new(reader);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| unsupported(format!("decode failed: {e}")))?;
    let (color, depth) = reader.output_color_type();
    let (stored, keep) = match color {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        png::ColorType::Indexed => return Err(unsupported("palette images".into())),
    };
    let (bytes_per_sample, max) = match depth {
        png::BitDepth::Eight => (1, 255.0f32),
        png::BitDepth::Sixteen => (2, 65535.0f32),
        other => return Err(unsupported(format!("bit depth {other:?}"))),
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| unsupported("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| unsupported(format!("decode failed: {e}")))?;
    let width = info.width as usize;
    let height = info.height as usize;
    let line = info.line_size;

    let n = width * height;
    let mut data = vec![0f32; n * keep];
    for y in 0..height {
        let row = &buf[y * line..(y + 1) * line];
        for x in 0..width {
            for c in 0..keep {
                let at = (x * stored + c) * bytes_per_sample;
                let raw = if bytes_per_sample == 1 {
                    row[at] as f32
                } else {
                    u16::from_be_bytes([row[at], row[at + 1]]) as f32
                };
                data[c * n + y * width + x] = raw / max;
            }
        }
    }
    ImageF::new(width, height, keep, data)
}

/// Writes `img` as an 8- or 16-bit PNG, clamping samples to `[0, 1]` first.
pub fn save_image(img: &ImageF, path: impl AsRef<Path>, depth: u8) -> Result<()> {
    let (bit_depth, max) = match depth {
        8 => (png::BitDepth::Eight, 255.0f32),
        16 => (png::BitDepth::Sixteen, 65535.0f32),
        d => {
            return Err(Error::InvalidParameter(format!(
                "PNG depth must be 8 or 16, got {d}"
            )))
        }
    };
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let file = File::create(path.as_ref())?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    encoder.set_color(if ch == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    encoder.set_depth(bit_depth);
    let mut writer = encoder.write_header().map_err(png_io)?;

    let bps = if depth == 8 { 1 } else { 2 };
    let mut bytes = Vec::with_capacity(w * h * ch * bps);
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let q = (img.get(x, y, c).clamp(0.0, 1.0) * max).round() as u16;
                if depth == 8 {
                    bytes.push(q as u8);
                } else {
                    bytes.extend_from_slice(&q.to_be_bytes());
                }
            }
        }
    }
    writer.write_image_data(&bytes).map_err(png_io)?;
    writer.finish().map_err(png_io)?;
    Ok(())
}

fn png_io(e: png::EncodingError) -> Error {
    match e {
        png::EncodingError::IoError(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(other.to_string())),
    }
}

/// Luma conversion with [`LUMA_WEIGHTS`]; 1-channel images are returned unchanged.
pub fn to_grayscale(img: &ImageF) -> ImageF {
    if img.channels() == 1 {
        return img.clone();
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| {
            (LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b).clamp(
                // weights sum to 1 only up to rounding
                r.min(g).min(b),
                r.max(g).max(b),
            )
        })
        .collect();
    ImageF {
        width: img.width(),
        height: img.height(),
        channels: 1,
        data,
    }
}

/// Replicates a 1-channel map into `channels` identical planes.
pub fn broadcast_channel(map: &ImageF, channels: usize) -> Result<ImageF> {
    if map.channels() != 1 {
        return Err(Error::InvalidChannelCount(map.channels()));
    }
    if !(channels == 1 || channels == 3) {
        return Err(Error::InvalidChannelCount(channels));
    }
    let mut data = Vec::with_capacity(map.plane_len() * channels);
    for _ in 0..channels {
        data.extend_from_slice(map.data());
    }
    ImageF::new(map.width(), map.height(), channels, data)
}

/// Serializes to the `NGF1` layout: magic, little-endian u32 width, height,
/// channels, then little-endian f32 samples in planar row-major order.
pub fn encode_ngf1(img: &ImageF) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + img.data().len() * 4);
    out.extend_from_slice(NGF1_MAGIC);
    for v in [img.width(), img.height(), img.channels()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_ngf1(bytes: &[u8]) -> Result<ImageF> {
    if bytes.len() < 16 || &bytes[..4] != NGF1_MAGIC {
        return Err(Error::UnsupportedFormat("missing NGF1 header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (w, h, c) = (word(4), word(8), word(12));
    let body = &bytes[16..];
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(c))
        .and_then(|n| n.checked_mul(4));
    if expected != Some(body.len()) {
        return Err(Error::UnsupportedFormat(format!(
            "NGF1 body is {} bytes for a {w}x{h}x{c} header",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    ImageF::new(w, h, c, data)
}

pub fn write_ngf1(img: &ImageF, path: impl AsRef<Path>) -> Result<()> {
    let mut f = BufWriter::new(File::create(path.as_ref())?);
    f.write_all(&encode_ngf1(img))?;
    f.flush()?;
    Ok(())
}

pub fn read_ngf1(path: impl AsRef<Path>) -> Result<ImageF> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode_ngf1(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_raw_png(path: &Path, w: u32, h: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) {
        let file = File::create(path).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
        enc.set_color(color);
        enc.set_depth(depth);
        if color == png::ColorType::Indexed {
            enc.set_palette(vec![0u8, 0, 0, 255, 255, 255]);
        }
        let mut wr = enc.write_header().unwrap();
        wr.write_image_data(data).unwrap();
    }

    #[test]
    fn loads_8bit_gray_extremes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        write_raw_png(&p, 2, 1, png::ColorType::Grayscale, png::BitDepth::Eight, &[255, 0]);
        let img = load_image(&p).unwrap();
        assert_eq!(img.channels(), 1);
        assert_eq!(img.get(0, 0, 0), 1.0);
        assert_eq!(img.get(1, 0, 0), 0.0);
    }

    #[test]
    fn loads_16bit_scaled_by_65535() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g16.png");
        let v = 32768u16.to_be_bytes();
        write_raw_png(&p, 1, 1, png::ColorType::Grayscale, png::BitDepth::Sixteen, &v);
        let img = load_image(&p).unwrap();
        assert!((img.get(0, 0, 0) as f64 - 32768.0 / 65535.0).abs() < 1e-7);
        assert!((img.get(0, 0, 0) - 0.500008).abs() < 1e-6);
    }

    #[test]
    fn drops_alpha() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgba.png");
        write_raw_png(&p, 1, 1, png::ColorType::Rgba, png::BitDepth::Eight, &[255, 0, 51, 7]);
        let img = load_image(&p).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.data(), &[1.0, 0.0, 0.2]);

        let p = dir.path().join("la.png");
        write_raw_png(&p, 1, 1, png::ColorType::GrayscaleAlpha, png::BitDepth::Eight, &[51, 0]);
        let img = load_image(&p).unwrap();
        assert_eq!(img.channels(), 1);
        assert_eq!(img.data(), &[0.2]);
    }

    #[test]
    fn rejects_palette_and_non_png() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pal.png");
        write_raw_png(&p, 2, 1, png::ColorType::Indexed, png::BitDepth::Eight, &[0, 1]);
        assert!(matches!(load_image(&p), Err(Error::UnsupportedFormat(_))));

        let p = dir.path().join("x.png");
        std::fs::write(&p, b"GIF89a not a png").unwrap();
        assert!(matches!(load_image(&p), Err(Error::UnsupportedFormat(_))));

        assert!(matches!(
            load_image(dir.path().join("missing.png")),
            Err(Error::FileNotFound(_))
        ));
    }

    #[test]
    fn save_load_half_gray_8bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("half.png");
        let img = ImageF::filled(4, 3, 3, 0.5).unwrap();
        save_image(&img, &p, 8).unwrap();
        let back = load_image(&p).unwrap();
        assert!(back.same_shape(&img));
        for &v in back.data() {
            assert!((v as f64 - 0.5).abs() <= 1.0 / 510.0 + 1e-7);
        }
    }

    #[test]
    fn save_clamps_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let img = ImageF::new(2, 1, 1, vec![1.2, -0.1]).unwrap();
        for depth in [8, 16] {
            save_image(&img, &p, depth).unwrap();
            let back = load_image(&p).unwrap();
            assert_eq!(back.data(), &[1.0, 0.0]);
        }
        assert!(matches!(save_image(&img, &p, 12), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn grayscale_weights() {
        let img = ImageF::from_planes(2, 1, &[&[1.0, 1.0], &[1.0, 0.0], &[1.0, 0.0]]).unwrap();
        let g = to_grayscale(&img);
        assert_eq!(g.channels(), 1);
        assert_eq!(g.get(0, 0, 0), 1.0);
        assert!((g.get(1, 0, 0) - 0.299).abs() < 1e-7);

        let gray = ImageF::new(2, 1, 1, vec![0.3, 0.9]).unwrap();
        assert_eq!(to_grayscale(&gray), gray);
    }

    #[test]
    fn broadcast_copies_planes() {
        let map = ImageF::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let b = broadcast_channel(&map, 3).unwrap();
        assert_eq!(b.channels(), 3);
        for c in 0..3 {
            assert_eq!(b.plane(c), map.data());
        }
        assert_eq!(broadcast_channel(&map, 1).unwrap(), map);
        assert!(matches!(broadcast_channel(&map, 2), Err(Error::InvalidChannelCount(2))));
        assert!(matches!(broadcast_channel(&b, 3), Err(Error::InvalidChannelCount(3))));
    }

    #[test]
    fn ngf1_layout_is_exact() {
        let img = ImageF::new(2, 1, 1, vec![1.0, -0.5]).unwrap();
        let bytes = encode_ngf1(&img);
        let mut expected = b"NGF1".to_vec();
        expected.extend_from_slice(&[2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0]);
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-0.5f32).to_le_bytes());
        assert_eq!(bytes, expected);
        assert!(decode_ngf1(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_ngf1(b"NGF2aaaaaaaaaaaa").is_err());
    }

    #[test]
    fn invalid_construction() {
        assert!(ImageF::new(0, 1, 1, vec![]).is_err());
        assert!(ImageF::new(1, 1, 2, vec![0.0, 0.0]).is_err());
        assert!(ImageF::new(2, 2, 1, vec![0.0; 3]).is_err());
    }

    fn arb_image() -> impl Strategy<Value = ImageF> {
        (1usize..9, 1usize..9, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(|(w, h, c)| {
            proptest::collection::vec(-0.2f32..1.2, w * h * c)
                .prop_map(move |d| ImageF::new(w, h, c, d).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn png_round_trip_within_half_step(img in arb_image(), sixteen in any::<bool>()) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("rt.png");
            let depth = if sixteen { 16 } else { 8 };
            save_image(&img, &p, depth).unwrap();
            let back = load_image(&p).unwrap();
            prop_assert!(back.same_shape(&img));
            let bound = 0.5 / ((1u32 << depth) - 1) as f64 + 1e-7;
            for (a, b) in img.clamped().data().iter().zip(back.data()) {
                prop_assert!((*a as f64 - *b as f64).abs() <= bound);
            }
        }

        #[test]
        fn ngf1_round_trip_is_lossless(img in arb_image()) {
            prop_assert_eq!(decode_ngf1(&encode_ngf1(&img)).unwrap(), img);
        }

        #[test]
        fn grayscale_stays_in_unit_range(img in arb_image()) {
            let g = to_grayscale(&img.clamped());
            prop_assert!(g.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
