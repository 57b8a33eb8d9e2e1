//! Flicker-banding toolkit: synthesize the striped luminance degradation
//! that rolling-shutter cameras pick up from pulse-modulated displays,
//! produce paired datasets with ground-truth masks and parameters, score
//! restorations with banding-aware masked losses, and recover stripe
//! geometry from degraded images by spectral analysis.
//!
//! The degradation model is strictly luminance-domain: stripes darken Y by a
//! multiplicative factor inside an oriented periodic mask (optionally with
//! per-stripe angle/spacing/width jitter, wavy feathered edges, and
//! signal-dependent sensor noise) while chroma passes through untouched.
//! Every stage is deterministic given its seed.

// Validation uses negated comparisons (`!(x > 0.0)`) so that NaN fails the
// check; the un-negated rewrite clippy suggests would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod color;
pub mod degrade;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod imgio;
pub mod mask;
pub mod metrics;
pub mod params;
pub mod pipeline;
pub mod testimg;

pub use color::{luminance, rgb_to_ycc, ycc_to_rgb, RgbImage, YccImage};
pub use degrade::{synthesize_lq, Degraded};
pub use error::{Error, Result};
pub use estimator::{estimate_banding, BandingEstimate, Detection, EstimatorOptions};
pub use geometry::{rotate_coords, sample_jitter, JitterTrace};
pub use mask::{mask_coverage, render_mask, FlickerMask};
pub use metrics::{
    masked_mean, masked_perceptual_loss, masked_pixel_loss, merged_loss, perceptual_proxy, psnr,
    ssim, MaskedLossWeights, MergedLoss, MetricReport, PairMetrics,
};
pub use params::BandingParams;
pub use pipeline::{
    evaluate_manifest, read_manifest, sample_params, synthesize_dataset, verify_manifest,
    verify_pair, DatasetSummary, PairRecord, ParamRanges, PatchMode, VerifySummary,
};
