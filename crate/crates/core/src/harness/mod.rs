//! Experiment harness: corpora, scoring, calibration and reports.

pub mod bench;
pub mod corpus;
pub mod eval;
pub mod experiment;
pub mod export;
pub mod sweep;
pub mod texture;

pub use bench::{bench, BenchReport};
pub use corpus::{
    ensure_disjoint, image_seed, label, load_corpus, save_corpus, synthesize_corpus,
    synthesize_scaled, CorpusImage,
};
pub use eval::{
    calibrate, classify, evaluate, evaluate_signal, fit_on_records, score_corpus,
    CalibrationOptions, ConfusionReport, ImageVerdict, ScoredImage, ScoringOptions,
};
pub use experiment::{
    run_ablation, run_chain_study, run_desk, AblationConfig, AblationReport, ChainConfig,
    ChainStudyReport, DeskConfig, DeskReport, SignalSummary,
};
pub use export::{read_records_csv, save_records_csv, write_records_csv};
pub use sweep::{sweep_alpha, AlphaRow, AlphaSweepReport};
pub use texture::TextureFamily;
