//! Stripe mask rendering.
//!
//! A mask holds one weight in [0, 1] per pixel: 1 inside a stripe, 0 outside,
//! and a linear ramp across feathered edges. Stripes are evaluated in their
//! own tilted frame (nominal angle plus the stripe's angle offset, pivoting
//! about the stripe midpoint), with the two edges displaced independently by
//! the trace's smooth edge processes. Overlapping contributions resolve by
//! per-pixel maximum.

use crate::error::{Error, Result};
use crate::geometry::{eta_at, stripe_centerlines, JitterTrace};
use crate::params::BandingParams;

/// Per-pixel stripe weights in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlickerMask {
    width: usize,
    height: usize,
    pub data: Vec<f64>,
}

impl FlickerMask {
    /// Wraps a row-major weight buffer, checking shape and range.
    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParams(format!(
                "mask value {} outside [0, 1]",
                bad
            )));
        }
        Ok(FlickerMask {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Complement mask (1 - m per pixel).
    pub fn complement(&self) -> FlickerMask {
        FlickerMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|m| 1.0 - m).collect(),
        }
    }
}

/// Fraction of total mask weight over the pixel count.
pub fn mask_coverage(mask: &FlickerMask) -> f64 {
    if mask.data.is_empty() {
        return 0.0;
    }
    mask.data.iter().sum::<f64>() / mask.data.len() as f64
}

/// Renders the stripe mask for an image of the given size.
///
/// Every stripe whose realized extent can touch the frame must be present in
/// `trace`; the per-stripe weight at a pixel is 1 at least `feather_px` inside
/// the (edge-displaced) stripe boundary, 0 at least `feather_px` outside it,
/// and a linear ramp in between. With `feather_px = 0` the boundary itself
/// counts as inside.
pub fn render_mask(
    params: &BandingParams,
    trace: &JitterTrace,
    img_w: usize,
    img_h: usize,
) -> Result<FlickerMask> {
    params.validate()?;
    trace.validate(params)?;
    if img_w == 0 || img_h == 0 {
        return Err(Error::DimensionMismatch(format!(
            "zero-area image {}x{}",
            img_w, img_h
        )));
    }

    // The whole frame, expressed as a window along the stripe normal.
    let half_diag = ((img_w as f64 - 1.0).powi(2) + (img_h as f64 - 1.0).powi(2)).sqrt() / 2.0;
    let lines = stripe_centerlines(params, trace, -half_diag, half_diag)?;

    let u_len = trace.eta_top.first().map_or(0, Vec::len);
    let needed_u = 2.0 * half_diag + 1.0;
    if params.delta_edge > 0.0 && (u_len as f64) < needed_u {
        return Err(Error::InconsistentTrace(format!(
            "edge sequences of length {} cannot span the image diagonal {:.0}",
            u_len, needed_u
        )));
    }

    let cx = (img_w as f64 - 1.0) / 2.0;
    let cy = (img_h as f64 - 1.0) / 2.0;
    let mut data = vec![0.0; img_w * img_h];

    for line in &lines {
        let pos = trace.position_of(line.k).ok_or_else(|| {
            Error::InconsistentTrace(format!("stripe {} missing from trace", line.k))
        })?;
        let tilt = trace.angle_offsets[pos];
        let (sin_k, cos_k) = (params.theta + tilt).sin_cos();
        // Tilting about the stripe's own midpoint: in the tilted frame the
        // centerline sits at v = center_v * cos(tilt) and the midpoint moves
        // to u = center_v * sin(tilt).
        let center_v = line.center_v * tilt.cos();
        let center_u = line.center_v * tilt.sin();
        let half_w = line.width / 2.0;
        let eta_top = &trace.eta_top[pos];
        let eta_bot = &trace.eta_bot[pos];

        // Beyond this distance from the centerline the stripe cannot
        // contribute, whatever the edge processes do.
        let eta_max = eta_top
            .iter()
            .chain(eta_bot)
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        let cutoff = half_w + params.delta_edge * eta_max + params.feather_px;

        for y in 0..img_h {
            let yc = y as f64 - cy;
            let row = &mut data[y * img_w..(y + 1) * img_w];
            for (x, slot) in row.iter_mut().enumerate() {
                let xc = x as f64 - cx;
                let v = -sin_k * xc + cos_k * yc;
                let d = v - center_v;
                if d.abs() > cutoff {
                    continue;
                }
                let u = cos_k * xc + sin_k * yc - center_u;
                let edge_top = half_w + params.delta_edge * eta_at(eta_top, u);
                let edge_bot = -half_w + params.delta_edge * eta_at(eta_bot, u);
                // Signed distance to the nearest edge, positive inside.
                let inside = (edge_top - d).min(d - edge_bot);
                let weight = if params.feather_px == 0.0 {
                    if inside >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    ((inside + params.feather_px) / (2.0 * params.feather_px)).clamp(0.0, 1.0)
                };
                if weight > *slot {
                    *slot = weight;
                }
            }
        }
    }

    Ok(FlickerMask {
        width: img_w,
        height: img_h,
        data,
    })
}
