//! Stripe-frame geometry: rotated coordinates, per-stripe jitter draws, and
//! centerline enumeration.
//!
//! All stripe math happens in a frame rotated by the stripe angle about the
//! image center, with `u` running along stripes and `v` across them. Stripe
//! `k` nominally sits at `v = k * period + phase`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::BandingParams;

/// Maximum resample attempts before a spacing/width draw is abandoned.
pub const MAX_JITTER_ATTEMPTS: u32 = 100;

/// Maps pixel coordinates into the stripe frame.
///
/// Rotates by `theta` about the image center `((w-1)/2, (h-1)/2)` and returns
/// `(u, v)`: `u` along the stripe direction, `v` along the stripe normal.
pub fn rotate_coords(x: f64, y: f64, theta: f64, img_w: usize, img_h: usize) -> (f64, f64) {
    let xc = x - (img_w as f64 - 1.0) / 2.0;
    let yc = y - (img_h as f64 - 1.0) / 2.0;
    let (sin, cos) = theta.sin_cos();
    (cos * xc + sin * yc, -sin * xc + cos * yc)
}

/// Draws a smooth zero-mean noise sequence of the given length.
///
/// White Gaussian noise is convolved with a Gaussian kernel of std-dev
/// `corr_len / 2` and the result is standardized to zero sample mean and unit
/// sample variance, so the amplitude written on top of it is meaningful
/// regardless of the correlation length. A single-sample request skips the
/// smoothing and returns one standard-normal draw.
pub fn lowpass_noise_1d(len: usize, corr_len: f64, rng: &mut impl Rng) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    if len == 1 {
        return vec![normal.sample(rng)];
    }
    let sigma = (corr_len / 2.0).max(1e-6);
    let radius = (3.0 * sigma).ceil() as usize;
    let kernel: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let t = i as f64 - radius as f64;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let white: Vec<f64> = (0..len + 2 * radius).map(|_| normal.sample(rng)).collect();
    let mut out = vec![0.0; len];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, kv) in kernel.iter().enumerate() {
            acc += kv * white[i + j];
        }
        *slot = acc;
    }
    let mean = out.iter().sum::<f64>() / len as f64;
    let var = out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len as f64;
    if var > 0.0 {
        let std = var.sqrt();
        for v in &mut out {
            *v = (*v - mean) / std;
        }
    }
    out
}

/// Every stochastic draw behind one banding realization.
///
/// Entry `i` describes stripe `stripe_indices[i]`. The edge sequences are
/// sampled on an integer grid along `u` centered on zero: sample `j` sits at
/// `u = j - (len - 1) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct JitterTrace {
    /// Stripe numbers `k` covered by this trace, ascending.
    pub stripe_indices: Vec<i64>,
    /// Per-stripe angle offsets, drawn from N(0, sigma_theta^2).
    pub angle_offsets: Vec<f64>,
    /// Per-stripe centerline offsets, drawn from U(-delta_g, delta_g).
    pub spacing_offsets: Vec<f64>,
    /// Per-stripe width offsets, drawn from U(-delta_w, delta_w).
    pub width_offsets: Vec<f64>,
    /// Unit-variance top-edge displacement sequences, one per stripe.
    pub eta_top: Vec<Vec<f64>>,
    /// Unit-variance bottom-edge displacement sequences, one per stripe.
    pub eta_bot: Vec<Vec<f64>>,
}

impl JitterTrace {
    /// Checks internal consistency and the per-stripe offset bounds.
    pub fn validate(&self, params: &BandingParams) -> Result<()> {
        let n = self.stripe_indices.len();
        if self.angle_offsets.len() != n
            || self.spacing_offsets.len() != n
            || self.width_offsets.len() != n
            || self.eta_top.len() != n
            || self.eta_bot.len() != n
        {
            return Err(Error::InconsistentTrace(format!(
                "field lengths disagree with {} stripe indices",
                n
            )));
        }
        if !self.stripe_indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InconsistentTrace(
                "stripe indices not strictly ascending".into(),
            ));
        }
        let u_len = self.eta_top.first().map_or(0, Vec::len);
        for (top, bot) in self.eta_top.iter().zip(&self.eta_bot) {
            if top.len() != u_len || bot.len() != u_len {
                return Err(Error::InconsistentTrace(
                    "edge sequences have mixed lengths".into(),
                ));
            }
        }
        for (i, &dg) in self.spacing_offsets.iter().enumerate() {
            if dg.abs() > params.delta_g {
                return Err(Error::InconsistentTrace(format!(
                    "spacing offset {} of stripe {} exceeds delta_g {}",
                    dg, self.stripe_indices[i], params.delta_g
                )));
            }
        }
        for (i, &dw) in self.width_offsets.iter().enumerate() {
            if dw.abs() > params.delta_w {
                return Err(Error::InconsistentTrace(format!(
                    "width offset {} of stripe {} exceeds delta_w {}",
                    dw, self.stripe_indices[i], params.delta_w
                )));
            }
        }
        Ok(())
    }

    /// Position of stripe `k` in the trace arrays.
    pub fn position_of(&self, k: i64) -> Option<usize> {
        self.stripe_indices.binary_search(&k).ok()
    }

    /// SHA-256 over a canonical byte serialization of every field.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.stripe_indices.len() as u64).to_le_bytes());
        for &k in &self.stripe_indices {
            hasher.update(k.to_le_bytes());
        }
        for field in [
            &self.angle_offsets,
            &self.spacing_offsets,
            &self.width_offsets,
        ] {
            for &v in field.iter() {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        for seqs in [&self.eta_top, &self.eta_bot] {
            for seq in seqs.iter() {
                hasher.update((seq.len() as u64).to_le_bytes());
                for &v in seq {
                    hasher.update(v.to_bits().to_le_bytes());
                }
            }
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(hex, "{:02x}", byte).expect("writing to String cannot fail");
        }
        hex
    }
}

/// Samples per-stripe jitter for `n_stripes` stripes centered on `k = 0`.
///
/// Draw order is fixed (angle, then spacing and width with rejection, then the
/// two edge sequences, stripe by stripe in ascending `k`), so a given seed
/// always reproduces the same trace. Spacing/width pairs that would push a
/// stripe into its predecessor are redrawn up to [`MAX_JITTER_ATTEMPTS`] times
/// before the whole call fails. Zero amplitudes short-circuit to exact zeros.
pub fn sample_jitter(
    params: &BandingParams,
    rng: &mut impl Rng,
    n_stripes: usize,
    u_len: usize,
) -> Result<JitterTrace> {
    params.validate()?;
    if n_stripes == 0 {
        return Err(Error::InvalidParams("n_stripes must be >= 1".into()));
    }
    let k0 = -((n_stripes as i64 - 1) / 2);
    let period = params.period();
    let angle_dist = if params.sigma_theta > 0.0 {
        Some(
            Normal::new(0.0, params.sigma_theta)
                .map_err(|e| Error::InvalidParams(e.to_string()))?,
        )
    } else {
        None
    };

    let mut trace = JitterTrace {
        stripe_indices: (0..n_stripes as i64).map(|i| k0 + i).collect(),
        angle_offsets: Vec::with_capacity(n_stripes),
        spacing_offsets: Vec::with_capacity(n_stripes),
        width_offsets: Vec::with_capacity(n_stripes),
        eta_top: Vec::with_capacity(n_stripes),
        eta_bot: Vec::with_capacity(n_stripes),
    };

    for i in 0..n_stripes {
        let k = trace.stripe_indices[i] as f64;
        let angle = match &angle_dist {
            Some(d) => d.sample(rng),
            None => 0.0,
        };

        let mut accepted = None;
        for _attempt in 0..MAX_JITTER_ATTEMPTS {
            let dg = if params.delta_g > 0.0 {
                rng.random_range(-params.delta_g..=params.delta_g)
            } else {
                0.0
            };
            let dw = if params.delta_w > 0.0 {
                rng.random_range(-params.delta_w..=params.delta_w)
            } else {
                0.0
            };
            let ok = if i == 0 {
                true
            } else {
                // Non-inversion: this stripe's lower edge must stay past the
                // previous stripe's upper edge.
                let prev_center =
                    (k - 1.0) * period + params.phase_phi + trace.spacing_offsets[i - 1];
                let prev_width = params.width_w + trace.width_offsets[i - 1];
                let center = k * period + params.phase_phi + dg;
                let width = params.width_w + dw;
                center - width / 2.0 > prev_center + prev_width / 2.0
            };
            if ok {
                accepted = Some((dg, dw));
                break;
            }
        }
        let (dg, dw) = accepted.ok_or(Error::JitterRejected {
            attempts: MAX_JITTER_ATTEMPTS,
        })?;

        trace.angle_offsets.push(angle);
        trace.spacing_offsets.push(dg);
        trace.width_offsets.push(dw);
        trace
            .eta_top
            .push(lowpass_noise_1d(u_len, params.edge_corr_len, rng));
        trace
            .eta_bot
            .push(lowpass_noise_1d(u_len, params.edge_corr_len, rng));
    }
    Ok(trace)
}

/// One stripe the renderer has to draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Centerline {
    /// Stripe number.
    pub k: i64,
    /// Realized centerline position along the stripe normal.
    pub center_v: f64,
    /// Realized stripe width.
    pub width: f64,
}

/// Lists the stripes whose realized extent touches `[v_min, v_max]`.
///
/// A stripe reaches `center_v +/- (width / 2 + delta_edge * max|eta| +
/// feather_px)`. The trace must cover every stripe whose nominal extent
/// (ignoring only the unbounded edge process) touches the window; a shorter
/// trace is rejected as inconsistent.
pub fn stripe_centerlines(
    params: &BandingParams,
    trace: &JitterTrace,
    v_min: f64,
    v_max: f64,
) -> Result<Vec<Centerline>> {
    params.validate()?;
    trace.validate(params)?;
    if !(v_min <= v_max) {
        return Err(Error::InvalidParams(format!(
            "empty v range [{}, {}]",
            v_min, v_max
        )));
    }
    let period = params.period();

    // Stripes the trace is required to know about.
    let nominal_reach = params.width_w / 2.0 + params.delta_w + params.delta_g + params.feather_px;
    let k_lo = ((v_min - nominal_reach - params.phase_phi) / period).ceil() as i64;
    let k_hi = ((v_max + nominal_reach - params.phase_phi) / period).floor() as i64;
    for k in k_lo..=k_hi {
        if trace.position_of(k).is_none() {
            return Err(Error::InconsistentTrace(format!(
                "stripe {} intersects [{}, {}] but is not in the trace",
                k, v_min, v_max
            )));
        }
    }

    let mut out = Vec::new();
    for (i, &k) in trace.stripe_indices.iter().enumerate() {
        let center_v = k as f64 * period + params.phase_phi + trace.spacing_offsets[i];
        let width = params.width_w + trace.width_offsets[i];
        let eta_max = trace.eta_top[i]
            .iter()
            .chain(&trace.eta_bot[i])
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        let reach = width / 2.0 + params.delta_edge * eta_max + params.feather_px;
        if center_v + reach >= v_min && center_v - reach <= v_max {
            out.push(Centerline { k, center_v, width });
        }
    }
    Ok(out)
}

/// Trace dimensions large enough to cover a `w x h` image for any phase.
///
/// Returns `(n_stripes, u_len)`: enough stripes that even the corners stay
/// covered after one extra period of slack, and an edge-sequence length that
/// spans the diagonal with a few pixels of margin.
pub fn trace_shape_for_image(params: &BandingParams, img_w: usize, img_h: usize) -> (usize, usize) {
    let half_diag = ((img_w as f64 - 1.0).powi(2) + (img_h as f64 - 1.0).powi(2)).sqrt() / 2.0;
    let period = params.period();
    let margin = period
        + params.width_w / 2.0
        + params.delta_w
        + params.delta_g
        + 6.0 * params.delta_edge
        + params.feather_px;
    let k_max = ((half_diag + margin) / period).ceil() as usize + 1;
    let u_len = 2 * (half_diag.ceil() as usize + 4) + 1;
    (2 * k_max + 1, u_len)
}

/// Linear interpolation into an edge sequence at continuous `u`.
///
/// The sequence grid is `u = j - (len - 1) / 2`; queries beyond either end
/// clamp to the boundary sample.
pub(crate) fn eta_at(seq: &[f64], u: f64) -> f64 {
    if seq.is_empty() {
        return 0.0;
    }
    let pos = u + (seq.len() as f64 - 1.0) / 2.0;
    if pos <= 0.0 {
        return seq[0];
    }
    let last = seq.len() - 1;
    if pos >= last as f64 {
        return seq[last];
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    seq[i] * (1.0 - frac) + seq[i + 1] * frac
}
