//! Gaussian kernel density estimate of belonging-image signals and the
//! quantile threshold derived from it.
//!
//! The threshold is `tau = inf { u : F(u) >= 1 - alpha }` where `F` is the
//! KDE's cumulative distribution. For a Gaussian kernel `F` has the closed
//! form `F(u) = mean_i Phi((u - s_i) / h)`.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::glcm::GlcmConfig;
use crate::loss::LossMetric;
use crate::signal::SignalKind;

pub const SCHEMA_VERSION: u32 = 1;

/// Default number of calibration samples.
pub const DEFAULT_SAMPLE_COUNT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Belonging,
    NonBelonging,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Belonging => "belonging",
            Decision::NonBelonging => "non_belonging",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Belonging iff `signal < tau`.
pub fn decide(signal: f64, tau: f64) -> Decision {
    if signal < tau {
        Decision::Belonging
    } else {
        Decision::NonBelonging
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    samples: Vec<f64>,
    bandwidth: f64,
}

impl Kde {
    /// KDE with an explicit bandwidth; a single sample is allowed.
    pub fn new(samples: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample);
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self { samples, bandwidth })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn cdf(&self, u: f64) -> f64 {
        kde_cdf(&self.samples, self.bandwidth, u)
    }

    pub fn density(&self, u: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (self.samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        norm * self
            .samples
            .iter()
            .map(|s| {
                let z = (u - s) / h;
                (-0.5 * z * z).exp()
            })
            .sum::<f64>()
    }

    /// `max - min` of the samples.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = min_max(&self.samples);
        hi - lo
    }
}

/// Fits a KDE, choosing the bandwidth by Silverman's rule unless given.
pub fn fit_kde(samples: &[f64], bandwidth: Option<f64>) -> Result<Kde> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteSample);
    }
    let h = match bandwidth {
        Some(h) => h,
        None => silverman_bandwidth(samples)?,
    };
    Kde::new(samples.to_vec(), h)
}

/// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, with the sample standard
/// deviation and linearly interpolated quartiles. Falls back to `sd` alone
/// when the IQR is zero.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let (lo, hi) = min_max(samples);
    if hi == lo {
        return Err(Error::ZeroSpread);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let scale = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * scale * (n as f64).powf(-0.2))
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

pub fn kde_cdf(samples: &[f64], bandwidth: f64, u: f64) -> f64 {
    let sum: f64 = samples
        .iter()
        .map(|s| normal_cdf((u - s) / bandwidth))
        .sum();
    (sum / samples.len() as f64).clamp(0.0, 1.0)
}

/// Smallest `u` with `cdf(u) >= 1 - alpha`, by bisection to full `f64`
/// resolution.
pub fn solve_threshold(kde: &Kde, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let target = 1.0 - alpha;
    let h = kde.bandwidth;
    let (min, max) = min_max(&kde.samples);
    let step = (max - min) + 2.0 * h;

    let mut lo = min - 10.0 * h;
    let mut hi = max + 10.0 * h;
    while kde.cdf(lo) >= target {
        lo -= step;
    }
    while kde.cdf(hi) < target {
        hi += step;
    }
    // Invariant: cdf(lo) < target <= cdf(hi).
    for _ in 0..2000 {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if kde.cdf(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// A fitted, persistable decision threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub schema_version: u32,
    pub backend_id: String,
    pub metric: LossMetric,
    pub glcm: GlcmConfig,
    /// Signal the samples and `tau` refer to.
    #[serde(default)]
    pub signal: SignalKind,
    pub alpha: f64,
    pub bandwidth: f64,
    pub tau: f64,
    pub samples: Vec<f64>,
    /// Uncalibrated ratios of the same calibration images, for refitting
    /// without homogeneity calibration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raw_samples: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub calibration_ids: Vec<String>,
}

/// Everything needed to fit a [`ThresholdModel`] besides the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSpec {
    pub backend_id: String,
    pub metric: LossMetric,
    pub glcm: GlcmConfig,
    pub signal: SignalKind,
    pub alpha: f64,
    pub bandwidth: Option<f64>,
}

impl ThresholdModel {
    pub fn fit(spec: &ThresholdSpec, samples: Vec<f64>) -> Result<Self> {
        let kde = fit_kde(&samples, spec.bandwidth)?;
        let tau = solve_threshold(&kde, spec.alpha)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            backend_id: spec.backend_id.clone(),
            metric: spec.metric,
            glcm: spec.glcm,
            signal: spec.signal,
            alpha: spec.alpha,
            bandwidth: kde.bandwidth,
            tau,
            samples,
            raw_samples: Vec::new(),
            calibration_ids: Vec::new(),
        })
    }

    pub fn kde(&self) -> Result<Kde> {
        Kde::new(self.samples.clone(), self.bandwidth)
    }

    pub fn cdf(&self, u: f64) -> f64 {
        kde_cdf(&self.samples, self.bandwidth, u)
    }

    pub fn decide(&self, signal: f64) -> Decision {
        decide(signal, self.tau)
    }

    /// Same calibration, refitted at another quantile.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let tau = solve_threshold(&self.kde()?, alpha)?;
        Ok(Self {
            alpha,
            tau,
            ..self.clone()
        })
    }

    /// Threshold over the uncalibrated ratio, fitted on `raw_samples` with a
    /// Silverman bandwidth.
    pub fn uncalibrated(&self) -> Result<Self> {
        match self.signal {
            SignalKind::Ratio => Ok(self.clone()),
            SignalKind::Calibrated if !self.raw_samples.is_empty() => {
                let spec = ThresholdSpec {
                    backend_id: self.backend_id.clone(),
                    metric: self.metric,
                    glcm: self.glcm,
                    signal: SignalKind::Ratio,
                    alpha: self.alpha,
                    bandwidth: None,
                };
                let mut m = Self::fit(&spec, self.raw_samples.clone())?;
                m.calibration_ids = self.calibration_ids.clone();
                Ok(m)
            }
            _ => Err(Error::MissingRawSamples),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "threshold schema_version {} (supported: {SCHEMA_VERSION})",
                m.schema_version
            )));
        }
        // Re-validates samples and bandwidth.
        m.kde()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
