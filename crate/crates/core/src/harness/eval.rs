//! Scoring, threshold calibration and confusion reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::{ensure_disjoint, ensure_unique_ids, image_seed, CorpusImage};
use crate::backend::Reconstructor;
use crate::error::{Error, Result};
use crate::glcm::GlcmConfig;
use crate::loss::LossMetric;
use crate::signal::{double_reconstruct, ReconstructionRecord, SignalKind};
use crate::threshold::{decide, Decision, ThresholdModel, ThresholdSpec};

/// Settings shared by calibration and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringOptions {
    pub metric: LossMetric,
    pub glcm: GlcmConfig,
    /// Run seed mixed into every per-image call seed.
    pub seed: u64,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        Self {
            metric: LossMetric::Mse,
            glcm: GlcmConfig::default(),
            seed: 0,
        }
    }
}

/// A scored image with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredImage {
    pub record: ReconstructionRecord,
    pub truth: Decision,
}

/// Double-reconstructs every image, in parallel, preserving order.
pub fn score_corpus<R: Reconstructor + ?Sized>(
    backend: &R,
    corpus: &[CorpusImage],
    opts: &ScoringOptions,
) -> Result<Vec<ScoredImage>> {
    corpus
        .par_iter()
        .map(|c| {
            let seed = image_seed(opts.seed, &c.id);
            let record = double_reconstruct(backend, &c.image, opts.metric, &opts.glcm, seed)?
                .with_id(c.id.clone());
            Ok(ScoredImage {
                record,
                truth: c.truth,
            })
        })
        .collect()
}

/// Fits a threshold over one signal of already scored calibration images.
pub fn fit_on_records(
    backend_id: &str,
    records: &[ReconstructionRecord],
    signal: SignalKind,
    alpha: f64,
    bandwidth: Option<f64>,
) -> Result<ThresholdModel> {
    let first = records.first().ok_or(Error::EmptyCorpus)?;
    let spec = ThresholdSpec {
        backend_id: backend_id.to_string(),
        metric: first.metric,
        glcm: GlcmConfig::default(),
        signal,
        alpha,
        bandwidth,
    };
    let samples = records.iter().map(|r| r.signal(signal)).collect();
    let mut model = ThresholdModel::fit(&spec, samples)?;
    if signal == SignalKind::Calibrated {
        model.raw_samples = records.iter().map(|r| r.ratio).collect();
    }
    model.calibration_ids = records.iter().map(|r| r.image_id.clone()).collect();
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub scoring: ScoringOptions,
    pub alpha: f64,
    pub bandwidth: Option<f64>,
}

/// Scores belonging images and fits the calibrated-signal threshold.
/// Returns the model together with the calibration records.
pub fn calibrate<R: Reconstructor + ?Sized>(
    backend: &R,
    corpus: &[CorpusImage],
    opts: &CalibrationOptions,
) -> Result<(ThresholdModel, Vec<ReconstructionRecord>)> {
    if corpus.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: corpus.len(),
        });
    }
    ensure_unique_ids(corpus)?;
    let records: Vec<ReconstructionRecord> = score_corpus(backend, corpus, &opts.scoring)?
        .into_iter()
        .map(|s| s.record)
        .collect();
    let mut model = fit_on_records(
        backend.id(),
        &records,
        SignalKind::Calibrated,
        opts.alpha,
        opts.bandwidth,
    )?;
    model.glcm = opts.scoring.glcm;
    Ok((model, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageVerdict {
    pub image_id: String,
    pub signal: f64,
    pub decision: Decision,
    pub truth: Decision,
    pub l1: f64,
    pub l2: f64,
    pub ratio: f64,
    pub homogeneity: f64,
    pub calibrated: f64,
    pub degenerate: bool,
}

impl ImageVerdict {
    pub fn record(&self, metric: LossMetric) -> ReconstructionRecord {
        ReconstructionRecord {
            image_id: self.image_id.clone(),
            metric,
            l1: self.l1,
            l2: self.l2,
            ratio: self.ratio,
            homogeneity: self.homogeneity,
            calibrated: self.calibrated,
            degenerate: self.degenerate,
        }
    }
}

/// Standard confusion counts with belonging as the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub backend_id: String,
    pub metric: LossMetric,
    pub signal: SignalKind,
    pub alpha: f64,
    pub tau: f64,
    pub positive_class: String,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub per_image: Vec<ImageVerdict>,
}

impl ConfusionReport {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Share of belonging images rejected.
    pub fn false_negative_rate(&self) -> f64 {
        self.fn_ as f64 / (self.tp + self.fn_).max(1) as f64
    }

    pub fn false_positive_rate(&self) -> f64 {
        self.fp as f64 / (self.tn + self.fp).max(1) as f64
    }

    pub fn records(&self) -> Vec<ReconstructionRecord> {
        self.per_image
            .iter()
            .map(|v| v.record(self.metric))
            .collect()
    }
}

/// Applies a fitted threshold to scored images. Degenerate records follow
/// [`ReconstructionRecord::degenerate_verdict`].
pub fn classify(model: &ThresholdModel, scored: &[ScoredImage]) -> ConfusionReport {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut per_image = Vec::with_capacity(scored.len());
    for s in scored {
        let r = &s.record;
        let value = r.signal(model.signal);
        let decision = r
            .degenerate_verdict()
            .unwrap_or_else(|| decide(value, model.tau));
        match (decision, s.truth) {
            (Decision::Belonging, Decision::Belonging) => tp += 1,
            (Decision::Belonging, Decision::NonBelonging) => fp += 1,
            (Decision::NonBelonging, Decision::NonBelonging) => tn += 1,
            (Decision::NonBelonging, Decision::Belonging) => fn_ += 1,
        }
        per_image.push(ImageVerdict {
            image_id: r.image_id.clone(),
            signal: value,
            decision,
            truth: s.truth,
            l1: r.l1,
            l2: r.l2,
            ratio: r.ratio,
            homogeneity: r.homogeneity,
            calibrated: r.calibrated,
            degenerate: r.degenerate,
        });
    }
    let total = tp + fp + tn + fn_;
    ConfusionReport {
        backend_id: model.backend_id.clone(),
        metric: model.metric,
        signal: model.signal,
        alpha: model.alpha,
        tau: model.tau,
        positive_class: Decision::Belonging.as_str().to_string(),
        tp,
        fp,
        tn,
        fn_,
        accuracy: if total == 0 {
            0.0
        } else {
            (tp + tn) as f64 / total as f64
        },
        per_image,
    }
}

/// Checks that a threshold may be applied to these corpora with this backend.
pub fn check_hygiene<R: Reconstructor + ?Sized>(
    backend: &R,
    model: &ThresholdModel,
    corpora: &[&[CorpusImage]],
) -> Result<()> {
    if model.backend_id != backend.id() {
        return Err(Error::BackendMismatch {
            expected: model.backend_id.clone(),
            actual: backend.id().to_string(),
        });
    }
    for corpus in corpora {
        ensure_disjoint(
            model.calibration_ids.iter().map(String::as_str),
            corpus.iter().map(|c| c.id.as_str()),
        )?;
    }
    Ok(())
}

/// Scores both corpora and classifies them with the calibrated threshold, or
/// with a threshold refitted on raw ratios when `use_calibration` is false.
///
/// Ground truth comes from which argument an image is passed in, not from
/// its stored label.
pub fn evaluate<R: Reconstructor + ?Sized>(
    backend: &R,
    model: &ThresholdModel,
    belonging: &[CorpusImage],
    non_belonging: &[CorpusImage],
    use_calibration: bool,
    scoring: &ScoringOptions,
) -> Result<ConfusionReport> {
    let model = if use_calibration {
        model.clone()
    } else {
        model.uncalibrated()?
    };
    evaluate_signal(backend, &model, belonging, non_belonging, scoring)
}

/// Evaluates with whatever signal `model` was fitted on.
pub fn evaluate_signal<R: Reconstructor + ?Sized>(
    backend: &R,
    model: &ThresholdModel,
    belonging: &[CorpusImage],
    non_belonging: &[CorpusImage],
    scoring: &ScoringOptions,
) -> Result<ConfusionReport> {
    if belonging.is_empty() || non_belonging.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    check_hygiene(backend, model, &[belonging, non_belonging])?;
    let scored = score_labeled(backend, belonging, non_belonging, scoring)?;
    Ok(classify(model, &scored))
}

/// Scores two corpora, forcing their ground-truth labels.
pub fn score_labeled<R: Reconstructor + ?Sized>(
    backend: &R,
    belonging: &[CorpusImage],
    non_belonging: &[CorpusImage],
    scoring: &ScoringOptions,
) -> Result<Vec<ScoredImage>> {
    let mut all = Vec::with_capacity(belonging.len() + non_belonging.len());
    for (corpus, truth) in [
        (belonging, Decision::Belonging),
        (non_belonging, Decision::NonBelonging),
    ] {
        all.extend(
            score_corpus(backend, corpus, scoring)?
                .into_iter()
                .map(|mut s| {
                    s.truth = truth;
                    s
                }),
        );
    }
    Ok(all)
}
