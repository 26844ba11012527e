//! Benchmark harness: seeded degradation of ground-truth images, Y-channel
//! PSNR/SSIM scoring, the pixel-wise oracle combiner, and a suite driver
//! that evaluates super-resolution variants against a manifest.

pub mod degrade;
pub mod manifest;
pub mod metrics;
pub mod suite;

pub use degrade::{
    degrade, DegradationMode, DegradationRecord, DegradeOptions, DEFAULT_JPEG_QUALITY,
    DEFAULT_NOISE_SIGMA, DEFAULT_SPECKLE_VARIANCE,
};
pub use manifest::{
    format_psnr, parse_params, read_manifest, write_manifest, write_scores, ManifestRow,
};
pub use metrics::{oracle_combine, psnr_y, ssim_y, ScoreRow};
pub use suite::{
    run_suite, run_suite_to_files, write_failures, SuiteConfig, SuiteFailure, SuiteOutcome,
    ZssrVariant,
};
