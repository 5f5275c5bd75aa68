use std::path::PathBuf;

use aedr::{GlcmConfig, LossMetric};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "aedr",
    version,
    about = "Attribute images to the autoencoder-based model that generated them"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Reconstruction loss.
    #[arg(long, global = true, default_value = "mse", value_parser = parse_loss)]
    pub loss: LossMetric,

    /// Gray levels used for the co-occurrence matrix.
    #[arg(long, global = true, default_value_t = aedr::glcm::DEFAULT_LEVELS)]
    pub glcm_levels: usize,

    /// Co-occurrence pixel offset as `dx,dy`.
    #[arg(long, global = true, default_value = "1,0", value_parser = parse_offset, allow_hyphen_values = true)]
    pub glcm_offset: (i32, i32),

    /// Count each pixel pair in one direction only.
    #[arg(long, global = true)]
    pub glcm_asymmetric: bool,

    /// Run seed; all randomness derives from it. Defaults to 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Human-readable tables instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
}

impl Global {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn glcm(&self) -> GlcmConfig {
        GlcmConfig {
            levels: self.glcm_levels,
            dx: self.glcm_offset.0,
            dy: self.glcm_offset.1,
            symmetric: !self.glcm_asymmetric,
        }
    }
}

fn parse_loss(s: &str) -> Result<LossMetric, String> {
    s.parse().map_err(|e: aedr::Error| e.to_string())
}

fn parse_offset(s: &str) -> Result<(i32, i32), String> {
    let (dx, dy) = s
        .split_once(',')
        .ok_or_else(|| format!("expected dx,dy, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<i32>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(dx)?, p(dy)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Truth {
    Belonging,
    NonBelonging,
}

impl From<Truth> for aedr::Decision {
    fn from(t: Truth) -> Self {
        match t {
            Truth::Belonging => aedr::Decision::Belonging,
            Truth::NonBelonging => aedr::Decision::NonBelonging,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Study {
    /// Two-backend attribution experiment.
    Desk,
    /// Calibrated vs uncalibrated accuracy on a mixed-homogeneity corpus.
    Ablation,
    /// Repeated reconstruction of non-belonging images.
    Chain,
}

/// Backend argument: a linear backend JSON file, `identity`, or
/// `external:<command line>` for a subprocess adapter.
#[derive(Debug, Args)]
pub struct BackendArg {
    #[arg(long)]
    pub backend: String,

    /// Adapter processes for an external backend.
    #[arg(long, default_value_t = 1)]
    pub adapter_pool: usize,

    /// Per-request adapter timeout in seconds.
    #[arg(long, default_value_t = 120.0)]
    pub adapter_timeout: f64,

    /// Channels the external adapter works in.
    #[arg(long, default_value_t = 3)]
    pub adapter_channels: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a linear stochastic autoencoder to a directory of PNGs.
    TrainBackend {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        components: usize,
        /// Latent noise as a multiple of the mean latent std.
        #[arg(long, default_value_t = aedr::backend::DEFAULT_NOISE_SCALE)]
        sigma: f64,
        /// Read `--sigma` as an absolute standard deviation.
        #[arg(long)]
        sigma_absolute: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the decision threshold from belonging images.
    Calibrate {
        #[command(flatten)]
        backend: BackendArg,
        #[arg(long)]
        images: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Kernel bandwidth; Silverman's rule when omitted.
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-image calibration records as CSV.
        #[arg(long)]
        records_csv: Option<PathBuf>,
    },
    /// Attribute a single image.
    Attribute {
        #[command(flatten)]
        backend: BackendArg,
        #[arg(long)]
        threshold: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Compare the uncalibrated ratio against its own threshold.
        #[arg(long)]
        no_calibration: bool,
    },
    /// Confusion report over belonging and non-belonging directories.
    Evaluate {
        #[command(flatten)]
        backend: BackendArg,
        #[arg(long)]
        threshold: PathBuf,
        #[arg(long)]
        belonging: PathBuf,
        #[arg(long)]
        non_belonging: PathBuf,
        /// Use the raw ratio and a threshold refitted on it.
        #[arg(long)]
        no_calibration: bool,
        /// Write per-image records as CSV.
        #[arg(long)]
        records_csv: Option<PathBuf>,
    },
    /// Accuracy over a grid of quantile parameters.
    SweepAlpha {
        #[command(flatten)]
        backend: BackendArg,
        #[arg(long)]
        est_belonging: PathBuf,
        #[arg(long)]
        est_non_belonging: PathBuf,
        #[arg(long)]
        eval_belonging: PathBuf,
        #[arg(long)]
        eval_non_belonging: PathBuf,
        /// Comma-separated α values.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.001,0.005,0.01,0.015,0.02,0.03,0.05,0.075,0.1"
        )]
        grid: Vec<f64>,
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Single and cumulative losses over repeated reconstruction.
    Chain {
        #[command(flatten)]
        backend: BackendArg,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 5)]
        steps: usize,
    },
    /// Time double reconstruction over a directory.
    Bench {
        #[command(flatten)]
        backend: BackendArg,
        #[arg(long)]
        images: PathBuf,
    },
    /// Decode random latent draws into belonging images.
    Synth {
        #[arg(long)]
        backend: PathBuf,
        #[arg(long)]
        count: usize,
        /// Multiplier on latent draws; small values give near-mean images.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value = "synth")]
        prefix: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write Gaussian random-field textures.
    Textures {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 2.0)]
        correlation_length: f64,
        #[arg(long, default_value_t = 0.5)]
        mean: f64,
        #[arg(long, default_value_t = 0.15)]
        amplitude: f64,
        #[arg(long, default_value = "texture")]
        prefix: String,
        #[arg(long, value_enum, default_value = "non-belonging")]
        label: Truth,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a built-in synthetic study end to end.
    Experiment {
        #[arg(value_enum)]
        study: Study,
        /// JSON config; unspecified fields take defaults. `--seed` overrides its seed.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the desk study's per-image records as CSV.
        #[arg(long)]
        records_csv: Option<PathBuf>,
    },
}
