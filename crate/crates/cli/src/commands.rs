use std::path::Path;
use std::time::Duration;

use aedr::harness::{
    self, image_seed, label, load_corpus, save_corpus, save_records_csv, CalibrationOptions,
    CorpusImage, ScoringOptions, TextureFamily,
};
use aedr::{
    chain_reconstruct, double_reconstruct, load_image, train_linear_backend, Decision, Error,
    ExternalBackend, ExternalConfig, IdentityBackend, LinearAeBackend, NoiseSigma, Reconstructor,
    ThresholdModel,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::args::{BackendArg, Cli, Command, Global, Study};
use crate::table;

pub enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

fn check_alpha(alpha: f64) -> Outcome {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        usage(format!(
            "--alpha must lie strictly inside (0, 1), got {alpha}"
        ))
    }
}

fn check_positive(name: &str, v: usize) -> Outcome {
    if v == 0 {
        usage(format!("{name} must be >= 1"))
    } else {
        Ok(())
    }
}

fn emit<T: Serialize>(value: &T, global: &Global, pretty: Option<String>) -> Outcome {
    let text = match (global.pretty, pretty) {
        (true, Some(table)) => table,
        (true, None) => serde_json::to_string_pretty(value).map_err(Error::from)?,
        (false, _) => serde_json::to_string(value).map_err(Error::from)?,
    };
    println!("{}", text.trim_end());
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn open_backend(arg: &BackendArg) -> Outcome<Box<dyn Reconstructor>> {
    if arg.backend == "identity" {
        return Ok(Box::new(IdentityBackend));
    }
    if let Some(cmd) = arg.backend.strip_prefix("external:") {
        let command: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
        if command.is_empty() {
            return usage("external backend needs a command, e.g. external:my-adapter --model X");
        }
        if !(arg.adapter_timeout > 0.0 && arg.adapter_timeout.is_finite()) {
            return usage("--adapter-timeout must be a positive number of seconds");
        }
        let cfg = ExternalConfig {
            command,
            pool_size: arg.adapter_pool,
            timeout: Duration::from_secs_f64(arg.adapter_timeout),
            channels: arg.adapter_channels,
        };
        return Ok(Box::new(ExternalBackend::spawn(&cfg)?));
    }
    Ok(Box::new(LinearAeBackend::load(&arg.backend)?))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn scoring(global: &Global, model: Option<&ThresholdModel>) -> ScoringOptions {
    match model {
        Some(m) => ScoringOptions {
            metric: m.metric,
            glcm: m.glcm,
            seed: global.seed(),
        },
        None => ScoringOptions {
            metric: global.loss,
            glcm: global.glcm(),
            seed: global.seed(),
        },
    }
}

#[derive(Serialize)]
struct Attribution {
    image: String,
    l1: f64,
    l2: f64,
    ratio: f64,
    homogeneity: f64,
    calibrated: f64,
    tau: f64,
    verdict: Decision,
}

#[derive(Serialize)]
struct TrainSummary {
    backend_id: String,
    images: usize,
    latent_dim: usize,
    noise_sigma: f64,
    out: String,
}

#[derive(Serialize)]
struct WriteSummary {
    images: usize,
    out: String,
}

pub fn run(cli: Cli) -> Outcome {
    let g = &cli.global;
    if let Err(e) = g.glcm().validate() {
        return usage(e.to_string());
    }
    match cli.command {
        Command::TrainBackend {
            corpus,
            components,
            sigma,
            sigma_absolute,
            out,
        } => {
            check_positive("--components", components)?;
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return usage(format!("--sigma must be >= 0, got {sigma}"));
            }
            let images: Vec<_> = load_corpus(&corpus, Decision::Belonging)?
                .into_iter()
                .map(|c| c.image)
                .collect();
            let noise = if sigma_absolute {
                NoiseSigma::Absolute(sigma)
            } else {
                NoiseSigma::Relative(sigma)
            };
            let backend = train_linear_backend(&images, components, noise, g.seed())?;
            backend.save(&out)?;
            emit(
                &TrainSummary {
                    backend_id: backend.id().to_string(),
                    images: images.len(),
                    latent_dim: backend.latent_dim(),
                    noise_sigma: backend.noise_sigma(),
                    out: out.display().to_string(),
                },
                g,
                None,
            )
        }
        Command::Calibrate {
            backend,
            images,
            alpha,
            bandwidth,
            out,
            records_csv,
        } => {
            check_alpha(alpha)?;
            if bandwidth.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
                return usage("--bandwidth must be positive");
            }
            let corpus = load_corpus(&images, Decision::Belonging)?;
            let backend = open_backend(&backend)?;
            let opts = CalibrationOptions {
                scoring: scoring(g, None),
                alpha,
                bandwidth,
            };
            let (model, records) = harness::calibrate(&backend, &corpus, &opts)?;
            model.save(&out)?;
            if let Some(p) = records_csv {
                save_records_csv(p, &records)?;
            }
            emit(&table::ThresholdSummary::new(&model), g, None)
        }
        Command::Attribute {
            backend,
            threshold,
            image,
            no_calibration,
        } => {
            let mut model = ThresholdModel::load(&threshold)?;
            if no_calibration {
                model = model.uncalibrated()?;
            }
            let x = load_image(&image)?;
            let backend = open_backend(&backend)?;
            if model.backend_id != backend.id() {
                return Err(Error::BackendMismatch {
                    expected: model.backend_id.clone(),
                    actual: backend.id().to_string(),
                }
                .into());
            }
            let seed = image_seed(g.seed(), &stem(&image));
            let r = double_reconstruct(&backend, &x, model.metric, &model.glcm, seed)?;
            let verdict = r
                .degenerate_verdict()
                .unwrap_or_else(|| model.decide(r.signal(model.signal)));
            let out = Attribution {
                image: image.display().to_string(),
                l1: r.l1,
                l2: r.l2,
                ratio: r.ratio,
                homogeneity: r.homogeneity,
                calibrated: r.calibrated,
                tau: model.tau,
                verdict,
            };
            let pretty = table::attribution(&out.image, &r, model.signal, model.tau, verdict);
            emit(&out, g, Some(pretty))
        }
        Command::Evaluate {
            backend,
            threshold,
            belonging,
            non_belonging,
            no_calibration,
            records_csv,
        } => {
            let model = ThresholdModel::load(&threshold)?;
            let bel = load_corpus(&belonging, Decision::Belonging)?;
            let non = load_corpus(&non_belonging, Decision::NonBelonging)?;
            let backend = open_backend(&backend)?;
            let report = harness::evaluate(
                &backend,
                &model,
                &bel,
                &non,
                !no_calibration,
                &scoring(g, Some(&model)),
            )?;
            if let Some(p) = records_csv {
                save_records_csv(p, &report.records())?;
            }
            emit(&report, g, Some(table::confusion(&report)))
        }
        Command::SweepAlpha {
            backend,
            est_belonging,
            est_non_belonging,
            eval_belonging,
            eval_non_belonging,
            grid,
            bandwidth,
        } => {
            if grid.is_empty() {
                return usage("--grid needs at least one alpha");
            }
            for &a in &grid {
                check_alpha(a)?;
            }
            let load = |p: &Path, t| load_corpus(p, t);
            let est_b = load(&est_belonging, Decision::Belonging)?;
            let est_n = load(&est_non_belonging, Decision::NonBelonging)?;
            let eval_b = load(&eval_belonging, Decision::Belonging)?;
            let eval_n = load(&eval_non_belonging, Decision::NonBelonging)?;
            let backend = open_backend(&backend)?;
            let opts = CalibrationOptions {
                scoring: scoring(g, None),
                alpha: grid[0],
                bandwidth,
            };
            let report =
                harness::sweep_alpha(&backend, &est_b, &eval_b, &est_n, &eval_n, &grid, &opts)?;
            emit(&report, g, Some(table::sweep(&report)))
        }
        Command::Chain {
            backend,
            image,
            steps,
        } => {
            check_positive("--steps", steps)?;
            let x = load_image(&image)?;
            let backend = open_backend(&backend)?;
            let seed = image_seed(g.seed(), &stem(&image));
            let rec = chain_reconstruct(&backend, &x, steps, g.loss, seed)?;
            emit(&rec, g, Some(table::chain(&rec)))
        }
        Command::Bench { backend, images } => {
            let corpus = load_corpus(&images, Decision::Belonging)?;
            let backend = open_backend(&backend)?;
            let report = harness::bench(&backend, &corpus, &scoring(g, None))?;
            emit(&report, g, Some(table::bench(&report)))
        }
        Command::Synth {
            backend,
            count,
            scale,
            prefix,
            out,
        } => {
            check_positive("--count", count)?;
            let b = LinearAeBackend::load(&backend)?;
            let imgs = harness::synthesize_scaled(&b, count, scale, g.seed())?;
            let corpus = label(imgs, &prefix, Decision::Belonging, b.id());
            save_corpus(&out, &corpus)?;
            emit(
                &WriteSummary {
                    images: corpus.len(),
                    out: out.display().to_string(),
                },
                g,
                None,
            )
        }
        Command::Textures {
            count,
            width,
            height,
            correlation_length,
            mean,
            amplitude,
            prefix,
            label: truth,
            out,
        } => {
            check_positive("--count", count)?;
            check_positive("--width", width)?;
            check_positive("--height", height)?;
            let fam = TextureFamily::new(&prefix, correlation_length, mean, amplitude);
            let imgs = fam.corpus(count, width, height, g.seed())?;
            let corpus: Vec<CorpusImage> = label(imgs, &prefix, truth.into(), "texture");
            save_corpus(&out, &corpus)?;
            emit(
                &WriteSummary {
                    images: corpus.len(),
                    out: out.display().to_string(),
                },
                g,
                None,
            )
        }
        Command::Experiment {
            study,
            config,
            records_csv,
        } => {
            macro_rules! load_cfg {
                ($t:ty) => {
                    match &config {
                        Some(p) => read_json::<$t>(p)?,
                        None => <$t>::default(),
                    }
                };
            }
            match study {
                Study::Desk => {
                    let mut cfg = load_cfg!(harness::DeskConfig);
                    cfg.seed = g.seed.unwrap_or(cfg.seed);
                    let report = harness::run_desk(&cfg)?;
                    if let Some(p) = records_csv {
                        let recs: Vec<_> = report
                            .per_image
                            .iter()
                            .map(|v| v.record(cfg.metric))
                            .collect();
                        save_records_csv(p, &recs)?;
                    }
                    emit(&report, g, Some(table::desk(&report)))
                }
                Study::Ablation => {
                    let mut cfg = load_cfg!(harness::AblationConfig);
                    cfg.desk.seed = g.seed.unwrap_or(cfg.desk.seed);
                    let report = harness::run_ablation(&cfg)?;
                    emit(&report, g, Some(table::ablation(&report)))
                }
                Study::Chain => {
                    let mut cfg = load_cfg!(harness::ChainConfig);
                    cfg.desk.seed = g.seed.unwrap_or(cfg.desk.seed);
                    let report = harness::run_chain_study(&cfg)?;
                    emit(&report, g, Some(table::chain_study(&report)))
                }
            }
        }
    }
}
