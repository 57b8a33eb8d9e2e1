//! Luminance-domain banding and sensor noise: clean RGB in, degraded RGB out.
//!
//! The degradation never touches chroma. RGB is converted to luma/chroma, the
//! luma plane is attenuated inside stripes, the original chroma planes are
//! recomposed around the new luma, and signal-dependent noise lands on the
//! reconstructed RGB.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::color::{rgb_to_ycc, ycc_to_rgb, RgbImage};
use crate::error::{Error, Result};
use crate::geometry::{sample_jitter, trace_shape_for_image, JitterTrace};
use crate::mask::{render_mask, FlickerMask};
use crate::params::BandingParams;

/// RNG stream carrying the geometry draws of a realization.
const STREAM_JITTER: u64 = 0;
/// RNG stream carrying the per-pixel noise draws.
const STREAM_NOISE: u64 = 1;

/// Attenuates luma inside stripes: `v_y * Y * M + Y * (1 - M)` per pixel.
///
/// The result is clamped into `[v_y * Y, Y]`; the clamp only ever moves a
/// value by its final rounding error and makes the attenuation bracket exact.
pub fn apply_banding_luma(luma: &[f64], mask: &[f64], v_y: f64) -> Result<Vec<f64>> {
    if luma.len() != mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "luma plane ({}) and mask ({}) differ in size",
            luma.len(),
            mask.len()
        )));
    }
    if !(v_y > 0.0 && v_y <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "v_y {} must lie in (0, 1]",
            v_y
        )));
    }
    Ok(luma
        .iter()
        .zip(mask)
        .map(|(&y, &m)| {
            let out = v_y * y * m + y * (1.0 - m);
            let lo = v_y * y;
            out.clamp(lo.min(y), lo.max(y))
        })
        .collect())
}

/// Adds heteroscedastic Gaussian noise without clamping.
///
/// Per pixel and channel: `I + sqrt(max(alpha * I, 0) + sigma_r^2) * eps`
/// with `eps ~ N(0, 1)`. Draw order is fixed (R plane, then G, then B, each
/// row-major), so a given RNG state always produces the same field.
pub fn sensor_noise_unclamped(
    img: &RgbImage,
    alpha: f64,
    sigma_r: f64,
    rng: &mut impl Rng,
) -> Result<RgbImage> {
    if alpha < 0.0 || sigma_r < 0.0 {
        return Err(Error::InvalidParams(format!(
            "noise coefficients must be >= 0 (alpha {}, sigma_r {})",
            alpha, sigma_r
        )));
    }
    let mut out = img.clone();
    if alpha == 0.0 && sigma_r == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    for plane in [&mut out.r, &mut out.g, &mut out.b] {
        for v in plane.iter_mut() {
            let var = (alpha * *v).max(0.0) + sigma_r * sigma_r;
            *v += var.sqrt() * normal.sample(rng);
        }
    }
    Ok(out)
}

/// Adds heteroscedastic Gaussian noise and clamps the result into [0, 1].
pub fn sensor_noise(
    img: &RgbImage,
    alpha: f64,
    sigma_r: f64,
    rng: &mut impl Rng,
) -> Result<RgbImage> {
    let mut out = sensor_noise_unclamped(img, alpha, sigma_r, rng)?;
    for plane in [&mut out.r, &mut out.g, &mut out.b] {
        for v in plane.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// A degraded image along with the exact geometry that produced it.
#[derive(Debug, Clone)]
pub struct Degraded {
    pub lq: RgbImage,
    pub mask: FlickerMask,
    pub trace: JitterTrace,
}

/// Runs the full degradation for one image.
///
/// Geometry and noise consume separate streams of a ChaCha generator seeded
/// with `params.seed`, so the same params on the same image reproduce the
/// output bit for bit, and the geometry does not shift when noise settings
/// change.
/// Renders just the stripe mask a given parameter set would produce on a
/// `width` x `height` image, using the same RNG stream discipline as
/// [`synthesize_lq`].
pub fn mask_for_params(params: &BandingParams, width: usize, height: usize) -> Result<FlickerMask> {
    params.validate()?;
    let (n_stripes, u_len) = trace_shape_for_image(params, width, height);
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(params.seed);
    jitter_rng.set_stream(STREAM_JITTER);
    let trace = sample_jitter(params, &mut jitter_rng, n_stripes, u_len)?;
    render_mask(params, &trace, width, height)
}

pub fn synthesize_lq(hq: &RgbImage, params: &BandingParams) -> Result<Degraded> {
    params.validate()?;
    if hq.is_empty() {
        return Err(Error::DimensionMismatch("empty input image".into()));
    }

    let (n_stripes, u_len) = trace_shape_for_image(params, hq.width(), hq.height());
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(params.seed);
    jitter_rng.set_stream(STREAM_JITTER);
    let trace = sample_jitter(params, &mut jitter_rng, n_stripes, u_len)?;
    let mask = render_mask(params, &trace, hq.width(), hq.height())?;

    let ycc = rgb_to_ycc(hq);
    let banded_y = apply_banding_luma(&ycc.y, &mask.data, params.v_y)?;
    // Chroma planes are carried over untouched; only luma changes.
    let recomposed = ycc_to_rgb(&ycc.with_luma(banded_y)?);

    let mut noise_rng = ChaCha8Rng::seed_from_u64(params.seed);
    noise_rng.set_stream(STREAM_NOISE);
    let lq = sensor_noise(
        &recomposed,
        params.noise_alpha,
        params.noise_sigma_r,
        &mut noise_rng,
    )?;

    Ok(Degraded { lq, mask, trace })
}
