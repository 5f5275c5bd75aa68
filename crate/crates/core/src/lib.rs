//! Training-free origin attribution for images produced by generative models
//! built on continuous autoencoders.
//!
//! An image is run through the model's autoencoder twice. The ratio of the
//! first to the second reconstruction loss, scaled by the image's GLCM
//! homogeneity, is compared against a threshold estimated by kernel density
//! estimation over images known to come from the model.

pub mod backend;
pub mod error;
pub mod glcm;
pub mod harness;
pub mod image;
pub mod loss;
pub mod signal;
pub mod threshold;

pub use backend::{
    train_linear_backend, CountingBackend, ExternalBackend, ExternalConfig, IdentityBackend,
    LinearAeBackend, NoiseSigma, Reconstructor,
};
pub use error::{Error, Result};
pub use glcm::{compute_glcm, homogeneity, GlcmConfig, GlcmMatrix};
pub use image::{load_image, quantize, save_image, to_grayscale, Dims, Image, QuantizedImage};
pub use loss::{loss, LossFn, LossMetric};
pub use signal::{
    baseline_signal, chain_reconstruct, double_reconstruct, ChainRecord, ReconstructionRecord,
    SignalKind,
};
pub use threshold::{decide, fit_kde, kde_cdf, solve_threshold, Decision, Kde, ThresholdModel};
