//! Seeded Gaussian random-field textures.
//!
//! White noise is smoothed with a periodic Gaussian kernel whose width is the
//! family's correlation length, rescaled to unit variance, then mapped to
//! `mean + amplitude * field` and clamped.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Dims, Image};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureFamily {
    pub name: String,
    /// Standard deviation of the smoothing kernel, in pixels. 0 = white noise.
    pub correlation_length: f64,
    pub mean: f64,
    pub amplitude: f64,
}

impl TextureFamily {
    pub fn new(name: &str, correlation_length: f64, mean: f64, amplitude: f64) -> Self {
        Self {
            name: name.to_string(),
            correlation_length,
            mean,
            amplitude,
        }
    }

    pub fn generate(&self, width: usize, height: usize, rng: &mut ChaCha8Rng) -> Result<Image> {
        if self.correlation_length.is_nan() || self.correlation_length < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "correlation length must be >= 0, got {}",
                self.correlation_length
            )));
        }
        let noise: Vec<f64> = (0..width * height)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let field = if self.correlation_length > 0.0 {
            smooth_periodic(&noise, width, height, self.correlation_length)
        } else {
            noise
        };
        let pixels = field
            .into_iter()
            .map(|f| self.mean + self.amplitude * f)
            .collect();
        Image::from_clamped(Dims::new(width, height, 1), pixels)
    }

    /// `n` images from one seeded stream.
    pub fn corpus(&self, n: usize, width: usize, height: usize, seed: u64) -> Result<Vec<Image>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| self.generate(width, height, &mut rng))
            .collect()
    }
}

fn kernel(sigma: f64, max_radius: usize) -> Vec<f64> {
    let radius = ((4.0 * sigma).ceil() as usize).min(max_radius);
    let raw: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    // Unit L2 norm keeps unit-variance noise at unit variance.
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.into_iter().map(|v| v / norm).collect()
}

fn smooth_periodic(field: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let kx = kernel(sigma, (w - 1) / 2);
    let ky = kernel(sigma, (h - 1) / 2);
    let rx = kx.len() / 2;
    let ry = ky.len() / 2;

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kx
                .iter()
                .enumerate()
                .map(|(i, k)| k * field[y * w + (x + w + i - rx) % w])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = ky
                .iter()
                .enumerate()
                .map(|(j, k)| k * tmp[((y + h + j - ry) % h) * w + x])
                .sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_in_range() {
        let fam = TextureFamily::new("t", 2.0, 0.5, 0.1);
        let a = fam.corpus(3, 16, 12, 4).unwrap();
        let b = fam.corpus(3, 16, 12, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert!(a.iter().all(|img| img.dims() == Dims::new(16, 12, 1)));
    }

    #[test]
    fn field_has_requested_moments() {
        let fam = TextureFamily::new("t", 3.0, 0.5, 0.1);
        let imgs = fam.corpus(40, 32, 32, 1).unwrap();
        let all: Vec<f64> = imgs.iter().flat_map(|i| i.pixels().to_vec()).collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let sd = (all.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / all.len() as f64).sqrt();
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
        assert!((sd - 0.1).abs() < 0.015, "{sd}");
    }

    #[test]
    fn longer_correlation_is_smoother() {
        let rough = TextureFamily::new("r", 0.0, 0.5, 0.1)
            .corpus(1, 32, 32, 2)
            .unwrap();
        let smooth = TextureFamily::new("s", 4.0, 0.5, 0.1)
            .corpus(1, 32, 32, 2)
            .unwrap();
        let tv = |img: &Image| {
            img.pixels()
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .sum::<f64>()
        };
        assert!(tv(&smooth[0]) < 0.3 * tv(&rough[0]));
    }
}
