//! Pixel containers, PNG I/O and the grayscale/quantization steps that feed
//! the loss metrics and the co-occurrence matrix.
//!
//! Pixels are `f64` in `[0, 1]`, row-major and channel-interleaved. 8-bit
//! samples only exist at the PNG boundary.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rec. 601 luma weights, in thousandths.
pub const LUMA_WEIGHTS: [f64; 3] = [299.0, 587.0, 114.0];

/// Width, height and channel count of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl Dims {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.width, self.height, self.channels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    dims: Dims,
    pixels: Vec<f64>,
}

impl Image {
    /// Builds an image, checking the length and `[0, 1]` range invariants.
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedChannels(channels));
        }
        let dims = Dims::new(width, height, channels);
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage("zero-sized image".into()));
        }
        if pixels.len() != dims.len() {
            return Err(Error::InvalidImage(format!(
                "expected {} samples for {dims}, got {}",
                dims.len(),
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidImage(format!("sample {bad} outside [0, 1]")));
        }
        Ok(Self { dims, pixels })
    }

    /// Builds an image by clamping every sample into `[0, 1]`.
    ///
    /// NaN samples become 0.
    pub fn from_clamped(dims: Dims, mut pixels: Vec<f64>) -> Result<Self> {
        for p in pixels.iter_mut() {
            *p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        }
        Self::new(dims.width, dims.height, dims.channels, pixels)
    }

    pub fn filled(dims: Dims, value: f64) -> Result<Self> {
        Self::new(
            dims.width,
            dims.height,
            dims.channels,
            vec![value; dims.len()],
        )
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn channels(&self) -> usize {
        self.dims.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    /// Sample at `(x, y, c)`.
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.pixels[(y * self.dims.width + x) * self.dims.channels + c]
    }

    pub(crate) fn ensure_same_dims(&self, other: &Image) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.to_string(),
                actual: other.dims.to_string(),
            });
        }
        Ok(())
    }
}

/// Gray-level codes in `[0, levels)`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedImage {
    width: usize,
    height: usize,
    levels: usize,
    codes: Vec<u16>,
}

impl QuantizedImage {
    pub fn new(width: usize, height: usize, levels: usize, codes: Vec<u16>) -> Result<Self> {
        if levels < 2 || levels > u16::MAX as usize + 1 {
            return Err(Error::InvalidConfig(format!(
                "gray levels must be in [2, 65536], got {levels}"
            )));
        }
        if codes.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} codes, got {}",
                width * height,
                codes.len()
            )));
        }
        if let Some(c) = codes.iter().find(|&&c| c as usize >= levels) {
            return Err(Error::InvalidImage(format!(
                "code {c} out of range for {levels} levels"
            )));
        }
        Ok(Self {
            width,
            height,
            levels,
            codes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn codes(&self) -> &[u16] {
        &self.codes
    }

    pub fn code(&self, x: usize, y: usize) -> u16 {
        self.codes[y * self.width + x]
    }
}

/// Reads an 8-bit grayscale or RGB PNG, mapping samples by `v / 255`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info()?;

    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(format!(
            "{}: bit depth {:?}, only 8-bit is supported",
            path.display(),
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: color type {other:?}, only gray and RGB are supported",
                path.display()
            )))
        }
    };
    let (width, height) = (info.width as usize, info.height as usize);

    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::UnsupportedFormat("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf)?;
    let row_bytes = width * channels;

    let mut pixels = Vec::with_capacity(width * height * channels);
    for row in buf[..frame.buffer_size()]
        .chunks(frame.line_size)
        .take(height)
    {
        pixels.extend(row[..row_bytes].iter().map(|&v| f64::from(v) / 255.0));
    }
    Image::new(width, height, channels, pixels)
}

/// Writes an image as an 8-bit PNG, rounding `p * 255` to the nearest code.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        img.width() as u32,
        img.height() as u32,
    );
    encoder.set_color(match img.channels() {
        1 => png::ColorType::Grayscale,
        _ => png::ColorType::Rgb,
    });
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&to_bytes(img))?;
    writer.finish()?;
    Ok(())
}

/// 8-bit samples, `round(p * 255)`.
pub fn to_bytes(img: &Image) -> Vec<u8> {
    img.pixels()
        .iter()
        .map(|&p| (p * 255.0).round() as u8)
        .collect()
}

/// Single-channel luma image; gray input is copied.
pub fn to_grayscale(img: &Image) -> Result<Image> {
    match img.channels() {
        1 => Ok(img.clone()),
        3 => {
            let pixels = img
                .pixels()
                .chunks_exact(3)
                .map(|rgb| {
                    // Integer weights keep white at exactly 1.0.
                    let y = (LUMA_WEIGHTS[0] * rgb[0]
                        + LUMA_WEIGHTS[1] * rgb[1]
                        + LUMA_WEIGHTS[2] * rgb[2])
                        / 1000.0;
                    y.clamp(0.0, 1.0)
                })
                .collect();
            Image::new(img.width(), img.height(), 1, pixels)
        }
        c => Err(Error::UnsupportedChannels(c)),
    }
}

/// Uniform binning `floor(p * levels)`, with `p = 1.0` landing in the top bin.
pub fn quantize(img: &Image, levels: usize) -> Result<QuantizedImage> {
    if img.channels() != 1 {
        return Err(Error::InvalidImage(format!(
            "quantize expects a single-channel image, got {} channels",
            img.channels()
        )));
    }
    if levels < 2 {
        return Err(Error::InvalidConfig(format!(
            "gray levels must be >= 2, got {levels}"
        )));
    }
    let top = (levels - 1) as f64;
    let codes = img
        .pixels()
        .iter()
        .map(|&p| (p * levels as f64).floor().min(top) as u16)
        .collect();
    QuantizedImage::new(img.width(), img.height(), levels, codes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(pixels: &[f64], width: usize) -> Image {
        Image::new(width, pixels.len() / width, 1, pixels.to_vec()).unwrap()
    }

    #[test]
    fn rejects_out_of_range_and_bad_lengths() {
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::new(1, 1, 1, vec![-0.1]).is_err());
        assert!(Image::new(2, 1, 1, vec![0.1]).is_err());
        assert!(matches!(
            Image::new(1, 1, 2, vec![0.0, 0.0]),
            Err(Error::UnsupportedChannels(2))
        ));
    }

    #[test]
    fn grayscale_luma() {
        let white = Image::new(1, 1, 3, vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(to_grayscale(&white).unwrap().pixels(), &[1.0]);
        let red = Image::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(to_grayscale(&red).unwrap().pixels(), &[0.299]);
        let g = gray(&[0.2, 0.7], 2);
        assert_eq!(to_grayscale(&g).unwrap(), g);
    }

    #[test]
    fn quantize_bins() {
        let q = quantize(&gray(&[0.0, 1.0, 0.5], 3), 32).unwrap();
        assert_eq!(q.codes(), &[0, 31, 16]);
        let rgb = Image::new(1, 1, 3, vec![0.0; 3]).unwrap();
        assert!(quantize(&rgb, 32).is_err());
        assert!(quantize(&gray(&[0.0], 1), 1).is_err());
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();

        let path = dir.path().join("white.png");
        save_image(&Image::new(1, 1, 3, vec![1.0; 3]).unwrap(), &path).unwrap();
        assert_eq!(load_image(&path).unwrap().pixels(), &[1.0, 1.0, 1.0]);

        let path = dir.path().join("black.png");
        save_image(&Image::new(1, 1, 3, vec![0.0; 3]).unwrap(), &path).unwrap();
        assert_eq!(load_image(&path).unwrap().pixels(), &[0.0, 0.0, 0.0]);

        let path = dir.path().join("gray.png");
        save_image(&gray(&[128.0 / 255.0, 64.0 / 255.0], 2), &path).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.channels(), 1);
        assert!((img.pixels()[0] - 0.501_960_784_313_725_5).abs() < 1e-12);
        assert!((img.pixels()[1] - 0.250_980_392_156_862_75).abs() < 1e-12);
    }

    #[test]
    fn png_rejects_16_bit_and_rgba() {
        let dir = tempfile::tempdir().unwrap();
        for (color, depth, bytes) in [
            (
                png::ColorType::Grayscale,
                png::BitDepth::Sixteen,
                vec![0u8, 0],
            ),
            (png::ColorType::Rgba, png::BitDepth::Eight, vec![0u8; 4]),
        ] {
            let path = dir.path().join("bad.png");
            let file = File::create(&path).unwrap();
            let mut enc = png::Encoder::new(BufWriter::new(file), 1, 1);
            enc.set_color(color);
            enc.set_depth(depth);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&bytes).unwrap();
            w.finish().unwrap();
            assert!(matches!(
                load_image(&path),
                Err(Error::UnsupportedFormat(_))
            ));
        }
        assert!(matches!(
            load_image(dir.path().join("missing.png")),
            Err(Error::Io { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quantize_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, levels in 2usize..300) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let q = quantize(&gray(&[lo, hi], 2), levels).unwrap();
                prop_assert!(q.codes()[0] <= q.codes()[1]);
                prop_assert!((q.codes()[1] as usize) < levels);
            }

            #[test]
            fn grayscale_stays_in_range(rgb in proptest::collection::vec(0.0f64..=1.0, 3)) {
                let img = Image::new(1, 1, 3, rgb).unwrap();
                let g = to_grayscale(&img).unwrap();
                prop_assert!((0.0..=1.0).contains(&g.pixels()[0]));
            }

            #[test]
            fn png_bytes_round_trip(bytes in proptest::collection::vec(any::<u8>(), 12)) {
                let dir = tempfile::tempdir().unwrap();
                let path = dir.path().join("rt.png");
                let pixels = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
                let img = Image::new(2, 2, 3, pixels).unwrap();
                save_image(&img, &path).unwrap();
                let back = load_image(&path).unwrap();
                prop_assert_eq!(to_bytes(&back), bytes);
            }
        }
    }
}
