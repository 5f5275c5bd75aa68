//! Gray-level co-occurrence matrix and the homogeneity statistic used to
//! calibrate the attribution signal for intrinsic image complexity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{quantize, to_grayscale, Image, QuantizedImage};

pub const DEFAULT_LEVELS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlcmConfig {
    pub levels: usize,
    pub dx: i32,
    pub dy: i32,
    pub symmetric: bool,
}

impl Default for GlcmConfig {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS,
            dx: 1,
            dy: 0,
            symmetric: true,
        }
    }
}

impl GlcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidConfig(format!(
                "GLCM levels must be >= 2, got {}",
                self.levels
            )));
        }
        if self.dx == 0 && self.dy == 0 {
            return Err(Error::InvalidConfig("GLCM offset must be nonzero".into()));
        }
        Ok(())
    }
}

/// Normalized co-occurrence probabilities, `levels x levels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GlcmMatrix {
    levels: usize,
    probs: Vec<f64>,
}

impl GlcmMatrix {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.levels + j]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

pub fn compute_glcm(img: &QuantizedImage, cfg: &GlcmConfig) -> Result<GlcmMatrix> {
    cfg.validate()?;
    if img.levels() != cfg.levels {
        return Err(Error::LevelMismatch {
            image: img.levels(),
            config: cfg.levels,
        });
    }
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (dx, dy) = (i64::from(cfg.dx), i64::from(cfg.dy));
    let levels = cfg.levels;

    // Range of source pixels whose offset partner stays in bounds.
    let xs = (-dx).max(0)..(w - dx).min(w);
    let ys = (-dy).max(0)..(h - dy).min(h);
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::NoValidPairs {
            dx: cfg.dx,
            dy: cfg.dy,
            width: img.width(),
            height: img.height(),
        });
    }

    let mut counts = vec![0u64; levels * levels];
    let codes = img.codes();
    for y in ys {
        let src = (y * w) as usize;
        let dst = ((y + dy) * w) as usize;
        for x in xs.clone() {
            let i = codes[src + x as usize] as usize;
            let j = codes[dst + (x + dx) as usize] as usize;
            counts[i * levels + j] += 1;
            if cfg.symmetric {
                counts[j * levels + i] += 1;
            }
        }
    }

    let total: u64 = counts.iter().sum();
    let probs = counts
        .into_iter()
        .map(|c| c as f64 / total as f64)
        .collect();
    Ok(GlcmMatrix { levels, probs })
}

/// `sum P(i,j) / (1 + |i - j|)`; 1 exactly when all mass sits on the diagonal.
pub fn homogeneity(glcm: &GlcmMatrix) -> f64 {
    let l = glcm.levels;
    let mut h = 0.0;
    for i in 0..l {
        for j in 0..l {
            let p = glcm.probs[i * l + j];
            if p != 0.0 {
                h += p / (1.0 + i.abs_diff(j) as f64);
            }
        }
    }
    h
}

/// Grayscale, quantize, build the GLCM and return its homogeneity.
pub fn image_homogeneity(img: &Image, cfg: &GlcmConfig) -> Result<f64> {
    let gray = to_grayscale(img)?;
    let q = quantize(&gray, cfg.levels)?;
    Ok(homogeneity(&compute_glcm(&q, cfg)?))
}
