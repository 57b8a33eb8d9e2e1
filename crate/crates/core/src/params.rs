//! Banding parameter set and its validity rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complete description of one banding realization.
///
/// Angles are radians, lengths are pixels, and `v_y` is the luminance
/// attenuation factor applied inside stripes. The jitter amplitudes
/// (`sigma_theta`, `delta_g`, `delta_w`, `delta_edge`) are all absolute;
/// setting them to zero gives a perfectly periodic pattern. `seed` fixes
/// every random draw made while realizing the pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandingParams {
    /// Stripe orientation in radians, in [-pi, pi).
    pub theta: f64,
    /// Nominal stripe width in pixels (> 0).
    pub width_w: f64,
    /// Nominal gap between stripes in pixels (> 0).
    pub gap_g: f64,
    /// Phase offset of the stripe train along the normal direction.
    pub phase_phi: f64,
    /// Std-dev of the per-stripe angle offset (radians, >= 0).
    pub sigma_theta: f64,
    /// Half-range of the per-stripe spacing offset (pixels, 0 <= delta_g < gap_g).
    pub delta_g: f64,
    /// Half-range of the per-stripe width offset (pixels, 0 <= delta_w < width_w).
    pub delta_w: f64,
    /// Amplitude of the stochastic edge displacement (pixels, >= 0).
    pub delta_edge: f64,
    /// Correlation length of the edge displacement process (pixels, >= 1).
    pub edge_corr_len: f64,
    /// Half-width of the linear edge feathering ramp (pixels, >= 0).
    pub feather_px: f64,
    /// Luminance attenuation inside stripes, in (0, 1].
    pub v_y: f64,
    /// Signal-dependent noise coefficient (>= 0).
    pub noise_alpha: f64,
    /// Signal-independent noise floor (>= 0).
    pub noise_sigma_r: f64,
    /// Seed for all stochastic draws of this realization.
    pub seed: u64,
}

impl BandingParams {
    /// Stripe period: width plus gap.
    pub fn period(&self) -> f64 {
        self.width_w + self.gap_g
    }

    /// Checks every field against its allowed range.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if !self.theta.is_finite()
            || self.theta < -std::f64::consts::PI
            || self.theta >= std::f64::consts::PI
        {
            return fail(format!("theta {} outside [-pi, pi)", self.theta));
        }
        if !(self.width_w > 0.0) {
            return fail(format!("width_w {} must be > 0", self.width_w));
        }
        if !(self.gap_g > 0.0) {
            return fail(format!("gap_g {} must be > 0", self.gap_g));
        }
        if !self.period().is_finite() || !(self.period() > 0.0) {
            return fail("period w + g must be positive and finite".into());
        }
        if !self.phase_phi.is_finite() {
            return fail("phase_phi must be finite".into());
        }
        if !(self.sigma_theta >= 0.0) {
            return fail(format!("sigma_theta {} must be >= 0", self.sigma_theta));
        }
        if !(self.delta_g >= 0.0) || self.delta_g >= self.gap_g {
            return fail(format!(
                "delta_g {} must lie in [0, gap_g = {})",
                self.delta_g, self.gap_g
            ));
        }
        if !(self.delta_w >= 0.0) || self.delta_w >= self.width_w {
            return fail(format!(
                "delta_w {} must lie in [0, width_w = {})",
                self.delta_w, self.width_w
            ));
        }
        if !(self.delta_edge >= 0.0) {
            return fail(format!("delta_edge {} must be >= 0", self.delta_edge));
        }
        if !(self.edge_corr_len >= 1.0) {
            return fail(format!("edge_corr_len {} must be >= 1", self.edge_corr_len));
        }
        if !(self.feather_px >= 0.0) {
            return fail(format!("feather_px {} must be >= 0", self.feather_px));
        }
        if !(self.v_y > 0.0 && self.v_y <= 1.0) {
            return fail(format!("v_y {} must lie in (0, 1]", self.v_y));
        }
        if !(self.noise_alpha >= 0.0) {
            return fail(format!("noise_alpha {} must be >= 0", self.noise_alpha));
        }
        if !(self.noise_sigma_r >= 0.0) {
            return fail(format!("noise_sigma_r {} must be >= 0", self.noise_sigma_r));
        }
        Ok(())
    }
}

impl Default for BandingParams {
    /// A mild, clearly visible pattern with every jitter term disabled.
    fn default() -> Self {
        BandingParams {
            theta: 0.0,
            width_w: 12.0,
            gap_g: 36.0,
            phase_phi: 0.0,
            sigma_theta: 0.0,
            delta_g: 0.0,
            delta_w: 0.0,
            delta_edge: 0.0,
            edge_corr_len: 16.0,
            feather_px: 2.0,
            v_y: 0.6,
            noise_alpha: 0.0,
            noise_sigma_r: 0.0,
            seed: 0,
        }
    }
}
