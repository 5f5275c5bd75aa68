//! The double-reconstruction attribution signal.
//!
//! For a test image `x` and autoencoder `R`:
//!
//! * `x* = R(x)`, `L1 = L(x*, x)`
//! * `x** = R(x*)`, `L2 = L(x**, x*)`
//! * `t = L1 / L2`, and the calibrated signal `t' = t * H(x)` where `H` is the
//!   GLCM homogeneity of the original image.
//!
//! Images the autoencoder's generator produced sit in high-probability
//! regions of its latent distribution, so both passes lose about the same
//! amount and `t` stays near 1. Foreign images lose much more on the first
//! pass than on the second.

use serde::{Deserialize, Serialize};

use crate::backend::Reconstructor;
use crate::error::Result;
use crate::glcm::{image_homogeneity, GlcmConfig};
use crate::image::Image;
use crate::loss::{LossFn, LossMetric};
use crate::threshold::Decision;

/// Division floor for `L2`.
pub const EPSILON: f64 = 1e-12;

/// Which scalar the threshold is fitted on and compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// `t' = t * H`
    #[default]
    Calibrated,
    /// `t = L1 / L2`
    Ratio,
    /// `L1` alone, the single-reconstruction baseline.
    SingleLoss,
}

impl SignalKind {
    pub fn name(self) -> &'static str {
        match self {
            SignalKind::Calibrated => "calibrated",
            SignalKind::Ratio => "ratio",
            SignalKind::SingleLoss => "single_loss",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionRecord {
    pub image_id: String,
    pub metric: LossMetric,
    pub l1: f64,
    pub l2: f64,
    pub ratio: f64,
    pub homogeneity: f64,
    pub calibrated: f64,
    pub degenerate: bool,
}

impl ReconstructionRecord {
    pub fn from_losses(metric: LossMetric, l1: f64, l2: f64, homogeneity: f64) -> Self {
        let degenerate = l2 < EPSILON;
        let ratio = l1 / l2.max(EPSILON);
        Self {
            image_id: String::new(),
            metric,
            l1,
            l2,
            ratio,
            homogeneity,
            calibrated: ratio * homogeneity,
            degenerate,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.image_id = id.into();
        self
    }

    pub fn signal(&self, kind: SignalKind) -> f64 {
        match kind {
            SignalKind::Calibrated => self.calibrated,
            SignalKind::Ratio => self.ratio,
            SignalKind::SingleLoss => self.l1,
        }
    }

    /// Verdict forced by a degenerate record, if any.
    ///
    /// `L1 = L2 = 0` means the backend reproduces the image exactly, so it is
    /// belonging; a vanishing `L2` after a nonzero `L1` means the image was
    /// projected onto the model's manifold and is non-belonging.
    pub fn degenerate_verdict(&self) -> Option<Decision> {
        if !self.degenerate {
            return None;
        }
        Some(if self.l1 < EPSILON {
            Decision::Belonging
        } else {
            Decision::NonBelonging
        })
    }
}

/// Runs `x -> x* -> x**` and assembles the record. Seeds `call_seed` and
/// `call_seed + 1` drive the two passes.
pub fn double_reconstruct<R: Reconstructor + ?Sized>(
    backend: &R,
    x: &Image,
    metric: LossMetric,
    cfg: &GlcmConfig,
    call_seed: u64,
) -> Result<ReconstructionRecord> {
    double_reconstruct_with(backend, x, metric, &metric, cfg, call_seed)
}

/// Same as [`double_reconstruct`] with a caller-supplied loss function;
/// `metric` only labels the record.
pub fn double_reconstruct_with<R: Reconstructor + ?Sized, L: LossFn + ?Sized>(
    backend: &R,
    x: &Image,
    metric: LossMetric,
    loss: &L,
    cfg: &GlcmConfig,
    call_seed: u64,
) -> Result<ReconstructionRecord> {
    backend.check_dims(x)?;
    let homogeneity = image_homogeneity(x, cfg)?;
    let first = backend.reconstruct(x, call_seed)?;
    let second = backend.reconstruct(&first, call_seed.wrapping_add(1))?;
    let l1 = loss.loss(&first, x)?;
    let l2 = loss.loss(&second, &first)?;
    Ok(ReconstructionRecord::from_losses(
        metric,
        l1,
        l2,
        homogeneity,
    ))
}

/// Single-reconstruction loss `L(R(x), x)`.
///
/// Uses the same seed as the first pass of [`double_reconstruct`], so it
/// equals that record's `l1`.
pub fn baseline_signal<R: Reconstructor + ?Sized>(
    backend: &R,
    x: &Image,
    metric: LossMetric,
    call_seed: u64,
) -> Result<f64> {
    let first = backend.reconstruct(x, call_seed)?;
    metric.loss(&first, x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub steps: usize,
    pub single_losses: Vec<f64>,
    pub cumulative_losses: Vec<f64>,
}

/// `n` consecutive reconstructions, each fed the previous output; step `k`
/// is scored against its own input, not against `x`.
pub fn chain_reconstruct<R: Reconstructor + ?Sized>(
    backend: &R,
    x: &Image,
    steps: usize,
    metric: LossMetric,
    call_seed: u64,
) -> Result<ChainRecord> {
    if steps == 0 {
        return Err(crate::Error::InvalidConfig(
            "chain needs at least one step".into(),
        ));
    }
    backend.check_dims(x)?;
    let mut single_losses = Vec::with_capacity(steps);
    let mut cumulative_losses = Vec::with_capacity(steps);
    let mut prev = x.clone();
    let mut total = 0.0;
    for k in 0..steps {
        let next = backend.reconstruct(&prev, call_seed.wrapping_add(k as u64))?;
        let l = metric.loss(&next, &prev)?;
        total += l;
        single_losses.push(l);
        cumulative_losses.push(total);
        prev = next;
    }
    Ok(ChainRecord {
        steps,
        single_losses,
        cumulative_losses,
    })
}
