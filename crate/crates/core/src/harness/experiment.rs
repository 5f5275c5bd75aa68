//! Desk-scale analogs of the attribution experiments: two linear backends
//! trained on disjoint texture families, a calibration ablation on a
//! mixed-homogeneity corpus, and a chain-reconstruction study.
//!
//! Every report is a pure function of its config, so identical seeds give
//! byte-identical JSON.

use serde::{Deserialize, Serialize};

use super::corpus::{image_seed, label, synthesize_scaled, CorpusImage};
use super::eval::{
    calibrate, classify, fit_on_records, score_labeled, CalibrationOptions, ConfusionReport,
    ImageVerdict, ScoredImage, ScoringOptions,
};
use super::texture::TextureFamily;
use crate::backend::{train_linear_backend, LinearAeBackend, NoiseSigma, Reconstructor};
use crate::error::{Error, Result};
use crate::glcm::GlcmConfig;
use crate::loss::LossMetric;
use crate::signal::{chain_reconstruct, SignalKind};
use crate::threshold::{Decision, ThresholdModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskConfig {
    pub width: usize,
    pub height: usize,
    pub components: usize,
    /// Noise standard deviation as a multiple of the mean latent std.
    pub noise_scale: f64,
    pub train_count: usize,
    pub calibration_count: usize,
    pub belonging_count: usize,
    pub non_belonging_count: usize,
    pub alpha: f64,
    pub family_a: TextureFamily,
    pub family_b: TextureFamily,
    pub metric: LossMetric,
    pub glcm: GlcmConfig,
    pub seed: u64,
}

impl Default for DeskConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            components: 16,
            noise_scale: 0.05,
            train_count: 256,
            calibration_count: 500,
            belonging_count: 500,
            non_belonging_count: 500,
            alpha: 0.05,
            family_a: TextureFamily::new("family_a", 2.0, 0.5, 0.15),
            family_b: TextureFamily::new("family_b", 5.0, 0.5, 0.15),
            metric: LossMetric::Mse,
            glcm: GlcmConfig::default(),
            seed: 0,
        }
    }
}

impl DeskConfig {
    fn sub_seed(&self, tag: &str) -> u64 {
        image_seed(self.seed, tag)
    }

    fn scoring(&self) -> ScoringOptions {
        ScoringOptions {
            metric: self.metric,
            glcm: self.glcm,
            seed: self.sub_seed("score"),
        }
    }

    fn calibration(&self) -> CalibrationOptions {
        CalibrationOptions {
            scoring: self.scoring(),
            alpha: self.alpha,
            bandwidth: None,
        }
    }

    /// Trains the target backend on family A and the foreign one on family B.
    pub fn train_backends(&self) -> Result<(LinearAeBackend, LinearAeBackend)> {
        let train = |fam: &TextureFamily, tag: &str| -> Result<LinearAeBackend> {
            let corpus = fam.corpus(
                self.train_count,
                self.width,
                self.height,
                self.sub_seed(&format!("train-{tag}")),
            )?;
            train_linear_backend(
                &corpus,
                self.components,
                NoiseSigma::Relative(self.noise_scale),
                self.sub_seed(&format!("noise-{tag}")),
            )
        };
        Ok((train(&self.family_a, "a")?, train(&self.family_b, "b")?))
    }

    fn textures(
        &self,
        fam: &TextureFamily,
        n: usize,
        tag: &str,
        truth: Decision,
    ) -> Result<Vec<CorpusImage>> {
        let imgs = fam.corpus(n, self.width, self.height, self.sub_seed(tag))?;
        Ok(label(imgs, tag, truth, &fam.name))
    }

    fn synth(
        &self,
        b: &LinearAeBackend,
        n: usize,
        scale: f64,
        tag: &str,
        truth: Decision,
    ) -> Result<Vec<CorpusImage>> {
        let imgs = synthesize_scaled(b, n, scale, self.sub_seed(tag))?;
        Ok(label(imgs, tag, truth, b.id()))
    }

    fn validate(&self) -> Result<()> {
        if self.non_belonging_count < 4 || self.belonging_count == 0 {
            return Err(Error::InvalidConfig(
                "experiment needs >= 1 belonging and >= 4 non-belonging images".into(),
            ));
        }
        Ok(())
    }
}

/// Confusion counts for one signal, without per-image rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSummary {
    pub signal: SignalKind,
    pub alpha: f64,
    pub bandwidth: f64,
    pub tau: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub false_negative_rate: f64,
}

impl SignalSummary {
    fn new(model: &ThresholdModel, r: &ConfusionReport) -> Self {
        Self {
            signal: model.signal,
            alpha: model.alpha,
            bandwidth: model.bandwidth,
            tau: model.tau,
            tp: r.tp,
            fp: r.fp,
            tn: r.tn,
            fn_: r.fn_,
            accuracy: r.accuracy,
            false_negative_rate: r.false_negative_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskReport {
    pub config: DeskConfig,
    pub target_backend: String,
    pub foreign_backend: String,
    pub calibrated: SignalSummary,
    pub ratio: SignalSummary,
    pub single_loss: SignalSummary,
    pub per_image: Vec<ImageVerdict>,
}

impl DeskReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fits thresholds for the calibrated, ratio and single-loss signals on the
/// same calibration records and classifies the same scored images with each.
fn three_signals(
    model: &ThresholdModel,
    cal_records: &[crate::signal::ReconstructionRecord],
    scored: &[ScoredImage],
) -> Result<(SignalSummary, SignalSummary, SignalSummary, ConfusionReport)> {
    let ratio = model.uncalibrated()?;
    let single = fit_on_records(
        &model.backend_id,
        cal_records,
        SignalKind::SingleLoss,
        model.alpha,
        None,
    )?;
    let cal_report = classify(model, scored);
    Ok((
        SignalSummary::new(model, &cal_report),
        SignalSummary::new(&ratio, &classify(&ratio, scored)),
        SignalSummary::new(&single, &classify(&single, scored)),
        cal_report,
    ))
}

/// Non-belonging images: half from the foreign backend, a quarter raw
/// family-B textures, a quarter raw family-A textures.
pub fn run_desk(cfg: &DeskConfig) -> Result<DeskReport> {
    cfg.validate()?;
    let (a, b) = cfg.train_backends()?;
    let cal = cfg.synth(&a, cfg.calibration_count, 1.0, "cal", Decision::Belonging)?;
    let bel = cfg.synth(&a, cfg.belonging_count, 1.0, "bel", Decision::Belonging)?;
    let n_b = cfg.non_belonging_count / 2;
    let n_raw_b = (cfg.non_belonging_count - n_b) / 2;
    let n_raw_a = cfg.non_belonging_count - n_b - n_raw_b;
    let mut non = cfg.synth(&b, n_b, 1.0, "foreign", Decision::NonBelonging)?;
    non.extend(cfg.textures(&cfg.family_b, n_raw_b, "raw-b", Decision::NonBelonging)?);
    non.extend(cfg.textures(&cfg.family_a, n_raw_a, "raw-a", Decision::NonBelonging)?);

    let (model, cal_records) = calibrate(&a, &cal, &cfg.calibration())?;
    super::eval::check_hygiene(&a, &model, &[&bel, &non])?;
    let scored = score_labeled(&a, &bel, &non, &cfg.scoring())?;
    let (calibrated, ratio, single_loss, report) = three_signals(&model, &cal_records, &scored)?;
    Ok(DeskReport {
        config: cfg.clone(),
        target_backend: a.id().to_string(),
        foreign_backend: b.id().to_string(),
        calibrated,
        ratio,
        single_loss,
        per_image: report.per_image,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub desk: DeskConfig,
    /// Latent scale of the near-constant belonging half.
    pub near_constant_scale: f64,
    /// Amplitude of the near-constant non-belonging textures.
    pub flat_amplitude: f64,
    /// Amplitude of the high-texture non-belonging textures.
    pub textured_amplitude: f64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            desk: DeskConfig::default(),
            near_constant_scale: 0.1,
            flat_amplitude: 0.02,
            textured_amplitude: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub config: AblationConfig,
    pub target_backend: String,
    pub calibrated_accuracy: f64,
    pub uncalibrated_accuracy: f64,
    pub calibrated: SignalSummary,
    pub uncalibrated: SignalSummary,
}

impl AblationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Calibrated vs uncalibrated accuracy where both classes are half
/// near-constant and half textured.
pub fn run_ablation(cfg: &AblationConfig) -> Result<AblationReport> {
    let d = &cfg.desk;
    d.validate()?;
    let (a, _) = d.train_backends()?;
    let halves = |n: usize, tag: &str| -> Result<Vec<CorpusImage>> {
        let flat = n / 2;
        let mut out = d.synth(
            &a,
            flat,
            cfg.near_constant_scale,
            &format!("{tag}-flat"),
            Decision::Belonging,
        )?;
        out.extend(d.synth(
            &a,
            n - flat,
            1.0,
            &format!("{tag}-tex"),
            Decision::Belonging,
        )?);
        Ok(out)
    };
    let cal = halves(d.calibration_count, "cal")?;
    let bel = halves(d.belonging_count, "bel")?;
    let flat_n = d.non_belonging_count / 2;
    let flat = TextureFamily {
        name: "flat".into(),
        amplitude: cfg.flat_amplitude,
        ..d.family_b.clone()
    };
    let rough = TextureFamily {
        name: "rough".into(),
        amplitude: cfg.textured_amplitude,
        ..d.family_b.clone()
    };
    let mut non = d.textures(&flat, flat_n, "non-flat", Decision::NonBelonging)?;
    non.extend(d.textures(
        &rough,
        d.non_belonging_count - flat_n,
        "non-tex",
        Decision::NonBelonging,
    )?);

    let (model, cal_records) = calibrate(&a, &cal, &d.calibration())?;
    super::eval::check_hygiene(&a, &model, &[&bel, &non])?;
    let scored = score_labeled(&a, &bel, &non, &d.scoring())?;
    let (calibrated, uncalibrated, _, _) = three_signals(&model, &cal_records, &scored)?;
    Ok(AblationReport {
        config: cfg.clone(),
        target_backend: a.id().to_string(),
        calibrated_accuracy: calibrated.accuracy,
        uncalibrated_accuracy: uncalibrated.accuracy,
        calibrated,
        uncalibrated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub desk: DeskConfig,
    pub images: usize,
    pub steps: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            desk: DeskConfig::default(),
            images: 200,
            steps: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStudyReport {
    pub config: ChainConfig,
    pub target_backend: String,
    /// Per-step single losses averaged over images.
    pub mean_single_losses: Vec<f64>,
    pub mean_cumulative_losses: Vec<f64>,
    /// Share of images whose first loss exceeds the second.
    pub first_exceeds_second: f64,
    /// Largest relative deviation of steps 2..n from their mean.
    pub tail_max_relative_deviation: f64,
}

/// Chains raw family-B textures, which the target backend never produced,
/// through the target backend.
pub fn run_chain_study(cfg: &ChainConfig) -> Result<ChainStudyReport> {
    let d = &cfg.desk;
    if cfg.images == 0 || cfg.steps < 2 {
        return Err(Error::InvalidConfig(
            "chain study needs >= 1 image and >= 2 steps".into(),
        ));
    }
    let (a, _) = d.train_backends()?;
    let non = d.textures(&d.family_b, cfg.images, "chain", Decision::NonBelonging)?;
    let run_seed = d.sub_seed("chain-score");
    let chains = {
        use rayon::prelude::*;
        non.par_iter()
            .map(|c| {
                chain_reconstruct(
                    &a,
                    &c.image,
                    cfg.steps,
                    d.metric,
                    image_seed(run_seed, &c.id),
                )
            })
            .collect::<Result<Vec<_>>>()?
    };
    let n = chains.len() as f64;
    let mean_at = |f: &dyn Fn(&crate::signal::ChainRecord) -> &Vec<f64>, k: usize| {
        chains.iter().map(|c| f(c)[k]).sum::<f64>() / n
    };
    let mean_single_losses: Vec<f64> = (0..cfg.steps)
        .map(|k| mean_at(&|c| &c.single_losses, k))
        .collect();
    let mean_cumulative_losses = (0..cfg.steps)
        .map(|k| mean_at(&|c| &c.cumulative_losses, k))
        .collect();
    let first_exceeds_second = chains
        .iter()
        .filter(|c| c.single_losses[0] > c.single_losses[1])
        .count() as f64
        / n;
    let tail = &mean_single_losses[1..];
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let tail_max_relative_deviation = tail
        .iter()
        .map(|v| (v - tail_mean).abs() / tail_mean)
        .fold(0.0, f64::max);
    Ok(ChainStudyReport {
        config: cfg.clone(),
        target_backend: a.id().to_string(),
        mean_single_losses,
        mean_cumulative_losses,
        first_exceeds_second,
        tail_max_relative_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DeskConfig {
        DeskConfig {
            width: 16,
            height: 16,
            components: 4,
            train_count: 40,
            calibration_count: 40,
            belonging_count: 20,
            non_belonging_count: 20,
            ..DeskConfig::default()
        }
    }

    #[test]
    fn desk_report_is_reproducible() {
        let cfg = small();
        let a = run_desk(&cfg).unwrap();
        assert_eq!(
            a.to_json().unwrap(),
            run_desk(&cfg).unwrap().to_json().unwrap()
        );
        assert_eq!(a.per_image.len(), 40);
        let c = &a.calibrated;
        assert_eq!(c.tp + c.fn_, 20);
        assert_eq!(c.tn + c.fp, 20);
        let other = run_desk(&DeskConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.per_image, other.per_image);
    }

    #[test]
    fn ablation_and_chain_run() {
        let ab = run_ablation(&AblationConfig {
            desk: small(),
            ..AblationConfig::default()
        })
        .unwrap();
        assert_eq!(ab.calibrated.signal, SignalKind::Calibrated);
        assert_eq!(ab.uncalibrated.signal, SignalKind::Ratio);

        let ch = run_chain_study(&ChainConfig {
            desk: small(),
            images: 10,
            steps: 4,
        })
        .unwrap();
        assert_eq!(ch.mean_single_losses.len(), 4);
        let last = ch.mean_cumulative_losses[3];
        assert!((last - ch.mean_single_losses.iter().sum::<f64>()).abs() < 1e-12);
    }
}
