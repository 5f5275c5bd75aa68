//! Reconstruction-loss metrics.
//!
//! All metrics return "lower = more faithful". SSIM is turned into a loss as
//! `1 - mean SSIM`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMetric {
    #[default]
    Mse,
    Mae,
    Ssim,
}

impl LossMetric {
    pub fn name(self) -> &'static str {
        match self {
            LossMetric::Mse => "mse",
            LossMetric::Mae => "mae",
            LossMetric::Ssim => "ssim",
        }
    }
}

impl fmt::Display for LossMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(LossMetric::Mse),
            "mae" => Ok(LossMetric::Mae),
            "ssim" => Ok(LossMetric::Ssim),
            other => Err(Error::InvalidConfig(format!(
                "unknown loss metric {other:?} (expected mse, mae or ssim)"
            ))),
        }
    }
}

/// Anything that scores the distance between two equally sized images.
///
/// Implemented by [`LossMetric`] and by closures, which lets callers plug in
/// custom metrics.
pub trait LossFn: Sync {
    fn loss(&self, a: &Image, b: &Image) -> Result<f64>;
}

impl LossFn for LossMetric {
    fn loss(&self, a: &Image, b: &Image) -> Result<f64> {
        loss(*self, a, b)
    }
}

impl<F> LossFn for F
where
    F: Fn(&Image, &Image) -> Result<f64> + Sync,
{
    fn loss(&self, a: &Image, b: &Image) -> Result<f64> {
        self(a, b)
    }
}

pub fn loss(metric: LossMetric, a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_dims(b)?;
    Ok(match metric {
        LossMetric::Mse => mse(a.pixels(), b.pixels()),
        LossMetric::Mae => mae(a.pixels(), b.pixels()),
        LossMetric::Ssim => (1.0 - mean_ssim(a, b)).clamp(0.0, 2.0),
    })
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn mae(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Mean SSIM over all channels, Gaussian-weighted 11x11 windows (sigma 1.5),
/// dynamic range 1. Only windows lying fully inside the image are scored;
/// images smaller than the window use the largest odd window that fits.
pub fn mean_ssim(a: &Image, b: &Image) -> f64 {
    let (w, h, ch) = (a.width(), a.height(), a.channels());
    let size = SSIM_WINDOW.min(odd_floor(w)).min(odd_floor(h));
    let kernel = gaussian_kernel(size, SSIM_SIGMA);
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);

    let mut total = 0.0;
    for c in 0..ch {
        let pa: Vec<f64> = a.pixels().iter().skip(c).step_by(ch).copied().collect();
        let pb: Vec<f64> = b.pixels().iter().skip(c).step_by(ch).copied().collect();

        // Separable filtering of x, y, x^2, y^2, xy with "valid" boundaries.
        let planes = [
            pa.clone(),
            pb.clone(),
            pa.iter().map(|v| v * v).collect(),
            pb.iter().map(|v| v * v).collect(),
            pa.iter().zip(&pb).map(|(x, y)| x * y).collect::<Vec<_>>(),
        ];
        let filtered: Vec<Vec<f64>> = planes
            .iter()
            .map(|p| filter_valid(p, w, h, &kernel))
            .collect();

        let n = filtered[0].len();
        let mut sum = 0.0;
        for (i, (&mx, &my)) in filtered[0].iter().zip(&filtered[1]).enumerate() {
            let sxx = filtered[2][i] - mx * mx;
            let syy = filtered[3][i] - my * my;
            let sxy = filtered[4][i] - mx * my;
            sum += ((2.0 * mx * my + c1) * (2.0 * sxy + c2))
                / ((mx * mx + my * my + c1) * (sxx + syy + c2));
        }
        total += sum / n as f64;
    }
    total / ch as f64
}

fn odd_floor(n: usize) -> usize {
    if n % 2 == 1 {
        n
    } else {
        n - 1
    }
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let norm: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / norm).collect()
}

fn filter_valid(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let ow = w - k + 1;
    let oh = h - k + 1;

    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = kernel.iter().zip(&row[x..x + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * horiz[(y + j) * ow + x])
                .sum();
        }
    }
    out
}
